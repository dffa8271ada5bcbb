#include <chrono>
#include <rclcpp/rclcpp.hpp>
#include "skeleton/msg/num.hpp"
#include "skeleton/srv/reset.hpp"

using namespace std::chrono_literals;

class CounterNode : public rclcpp::Node
{
public:
  CounterNode()
  : Node("counter")
  {
    counting_pub_ = this->create_publisher<skeleton::msg::Num>("/counting", 10);
    reset_client_ = this->create_client<skeleton::srv::Reset>("reset");
    timer_ = this->create_wall_timer(500ms, [this]() { tick(); });
  }

private:
  void tick()
  {
    skeleton::msg::Num msg;
    msg.num = ++count_;
    counting_pub_->publish(msg);
    if (count_ % 100 == 0 && reset_client_->service_is_ready()) {
      reset_client_->async_send_request(std::make_shared<skeleton::srv::Reset::Request>());
    }
  }

  rclcpp::Publisher<skeleton::msg::Num>::SharedPtr counting_pub_;
  rclcpp::Client<skeleton::srv::Reset>::SharedPtr reset_client_;
  rclcpp::TimerBase::SharedPtr timer_;
  int64_t count_ = 0;
};

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<CounterNode>());
  rclcpp::shutdown();
  return 0;
}
