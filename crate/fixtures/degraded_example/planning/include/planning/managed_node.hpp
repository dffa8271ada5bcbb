#pragma once

#include <string>
#include <rclcpp/rclcpp.hpp>

namespace planning
{

class ManagedNode : public rclcpp::Node
{
public:
  explicit ManagedNode(const std::string & name)
  : Node(name) {}

  bool active() const {return active_;}

protected:
  bool active_ = false;
};

class ComponentBase : public ManagedNode
{
public:
  explicit ComponentBase(const std::string & name)
  : ManagedNode(name) {}
};

class PlannerCore : public ComponentBase
{
public:
  explicit PlannerCore(const std::string & name)
  : ComponentBase(name) {}

protected:
  double horizon_ = 5.0;
};

}  // namespace planning
