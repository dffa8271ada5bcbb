#include <rclcpp/rclcpp.hpp>
#include "skeleton/msg/status.hpp"
#include "skeleton/srv/add_two_ints.hpp"

using std::placeholders::_1;

class MonitorNode : public rclcpp::Node
{
public:
  MonitorNode()
  : Node("monitor")
  {
    status_sub_ = this->create_subscription<skeleton::msg::Status>(
      "status", 10, std::bind(&MonitorNode::status_callback, this, _1));
    adder_ = this->create_client<skeleton::srv::AddTwoInts>("add_two_ints");
  }

private:
  void status_callback(const skeleton::msg::Status::SharedPtr msg)
  {
    if (msg->level > 0 && adder_->service_is_ready()) {
      auto req = std::make_shared<skeleton::srv::AddTwoInts::Request>();
      req->a = errors_;
      req->b = msg->level;
      adder_->async_send_request(req);
    }
  }

  rclcpp::Subscription<skeleton::msg::Status>::SharedPtr status_sub_;
  rclcpp::Client<skeleton::srv::AddTwoInts>::SharedPtr adder_;
  int64_t errors_ = 0;
};

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<MonitorNode>());
  rclcpp::shutdown();
  return 0;
}
