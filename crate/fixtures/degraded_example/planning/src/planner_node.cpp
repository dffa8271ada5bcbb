#include "planning/managed_node.hpp"
#include "planning/msg/pose2_d.hpp"
#include "planning/msg/path.hpp"

using std::placeholders::_1;

namespace planning
{

class PlannerNode : public PlannerCore
{
public:
  PlannerNode()
  : PlannerCore("planner")
  {
    goal_sub_ = this->create_subscription<planning::msg::Pose2D>(
      "goal", 10, std::bind(&PlannerNode::on_goal, this, _1));
    path_pub_ = this->create_publisher<planning::msg::Path>("path", 10);
  }

private:
  void on_goal(const planning::msg::Pose2D::SharedPtr goal)
  {
    planning::msg::Path path;
    path.poses.push_back(*goal);
    path_pub_->publish(path);
  }

  rclcpp::Subscription<planning::msg::Pose2D>::SharedPtr goal_sub_;
  rclcpp::Publisher<planning::msg::Path>::SharedPtr path_pub_;
};

}  // namespace planning

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<planning::PlannerNode>());
  rclcpp::shutdown();
  return 0;
}
