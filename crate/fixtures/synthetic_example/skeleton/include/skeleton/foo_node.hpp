#pragma once

#include <rclcpp/rclcpp.hpp>
#include "skeleton/msg/num.hpp"

class FooNode : public rclcpp::Node
{
public:
  FooNode();

private:
  void counting_callback(const skeleton::msg::Num::SharedPtr msg);

  rclcpp::Publisher<skeleton::msg::Num>::SharedPtr number_pub_;
  rclcpp::Publisher<skeleton::msg::Num>::SharedPtr debug_pub_;
  rclcpp::Subscription<skeleton::msg::Num>::SharedPtr counting_sub_;
  int64_t last_ = 0;
};
