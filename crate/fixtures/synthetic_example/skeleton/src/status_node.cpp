#include <chrono>
#include <rclcpp/rclcpp.hpp>
#include "skeleton/msg/status.hpp"

using namespace std::chrono_literals;

class StatusNode : public rclcpp::Node
{
public:
  StatusNode()
  : Node("status_node")
  {
    status_pub_ = this->create_publisher<skeleton::msg::Status>("status", 10);
    timer_ = this->create_wall_timer(1s, [this]() {
        skeleton::msg::Status s;
        s.text = "ok";
        s.level = 0;
        status_pub_->publish(s);
      });
  }

private:
  rclcpp::Publisher<skeleton::msg::Status>::SharedPtr status_pub_;
  rclcpp::TimerBase::SharedPtr timer_;
};

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<StatusNode>());
  rclcpp::shutdown();
  return 0;
}
