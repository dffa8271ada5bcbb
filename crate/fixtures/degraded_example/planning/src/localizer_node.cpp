#include <memory>
#include <rclcpp/rclcpp.hpp>
#include "planning/debug_publisher.hpp"
#include "planning/msg/pose2_d.hpp"

using std::placeholders::_1;

namespace planning
{

class LocalizerNode : public rclcpp::Node
{
public:
  LocalizerNode()
  : Node("localizer")
  {
    odom_sub_ = this->create_subscription<planning::msg::Pose2D>(
      "odom", 10, std::bind(&LocalizerNode::on_odom, this, _1));
    pose_pub_ = this->create_publisher<planning::msg::Pose2D>("pose", 10);
    debug_ = std::make_unique<DebugPublisher>(this, "debug/localizer");
  }

private:
  void on_odom(const planning::msg::Pose2D::SharedPtr odom)
  {
    pose_pub_->publish(*odom);
    debug_->publish("theta", odom->theta);
  }

  rclcpp::Subscription<planning::msg::Pose2D>::SharedPtr odom_sub_;
  rclcpp::Publisher<planning::msg::Pose2D>::SharedPtr pose_pub_;
  std::unique_ptr<DebugPublisher> debug_;
};

}  // namespace planning

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<planning::LocalizerNode>());
  rclcpp::shutdown();
  return 0;
}
