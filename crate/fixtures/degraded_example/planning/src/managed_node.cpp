#include "planning/managed_node.hpp"

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<planning::ManagedNode>("managed"));
  rclcpp::shutdown();
  return 0;
}
