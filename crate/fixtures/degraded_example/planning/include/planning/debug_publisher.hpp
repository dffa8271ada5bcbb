#pragma once

#include <string>
#include <rclcpp/rclcpp.hpp>
#include "planning/msg/debug_value.hpp"

namespace planning
{

// Thin wrapper so nodes can publish keyed diagnostics without owning a publisher.
class DebugPublisher
{
public:
  DebugPublisher(rclcpp::Node * node, const std::string & topic);
  void publish(const std::string & key, double value);

private:
  rclcpp::Publisher<planning::msg::DebugValue>::SharedPtr pub_;
};

}  // namespace planning
