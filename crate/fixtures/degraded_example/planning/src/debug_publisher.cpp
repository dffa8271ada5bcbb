#include "planning/debug_publisher.hpp"

namespace planning
{

DebugPublisher::DebugPublisher(rclcpp::Node * node, const std::string & topic)
{
  pub_ = node->create_publisher<planning::msg::DebugValue>(topic, 10);
}

void DebugPublisher::publish(const std::string & key, double value)
{
  planning::msg::DebugValue msg;
  msg.key = key;
  msg.value = value;
  pub_->publish(msg);
}

}  // namespace planning
