#include "skeleton/foo_node.hpp"

using std::placeholders::_1;

FooNode::FooNode()
: Node("foo_node")
{
  number_pub_ = this->create_publisher<skeleton::msg::Num>("number", 10);
  debug_pub_ = this->create_publisher<skeleton::msg::Num>("debug_number", 10);
  counting_sub_ = this->create_subscription<skeleton::msg::Num>(
    "/counting", 10, std::bind(&FooNode::counting_callback, this, _1));
}

void FooNode::counting_callback(const skeleton::msg::Num::SharedPtr msg)
{
  skeleton::msg::Num out;
  out.num = msg->num * 2;
  number_pub_->publish(out);
  if (msg->num != last_ + 1) {
    skeleton::msg::Num gap;
    gap.num = msg->num - last_;
    debug_pub_->publish(gap);
  }
  last_ = msg->num;
}

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<FooNode>());
  rclcpp::shutdown();
  return 0;
}
