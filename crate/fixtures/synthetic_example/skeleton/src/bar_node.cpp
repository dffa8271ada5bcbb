#include <rclcpp/rclcpp.hpp>
#include "skeleton/msg/num.hpp"
#include "skeleton/srv/reset.hpp"

using std::placeholders::_1;
using std::placeholders::_2;

class BarNode : public rclcpp::Node
{
public:
  BarNode()
  : Node("bar_node")
  {
    number_sub_ = this->create_subscription<skeleton::msg::Num>(
      "bit_number", 10, std::bind(&BarNode::number_callback, this, _1));
    reset_srv_ = this->create_service<skeleton::srv::Reset>(
      "reset", std::bind(&BarNode::reset_callback, this, _1, _2));
  }

private:
  void number_callback(const skeleton::msg::Num::SharedPtr msg)
  {
    total_ += msg->num;
    RCLCPP_INFO(get_logger(), "total %ld", total_);
  }

  void reset_callback(
    const std::shared_ptr<skeleton::srv::Reset::Request>,
    std::shared_ptr<skeleton::srv::Reset::Response> response)
  {
    total_ = 0;
    response->success = true;
  }

  rclcpp::Subscription<skeleton::msg::Num>::SharedPtr number_sub_;
  rclcpp::Service<skeleton::srv::Reset>::SharedPtr reset_srv_;
  int64_t total_ = 0;
};

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<BarNode>());
  rclcpp::shutdown();
  return 0;
}
