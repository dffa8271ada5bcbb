#include <rclcpp/rclcpp.hpp>
#include "skeleton/srv/add_two_ints.hpp"

using std::placeholders::_1;
using std::placeholders::_2;

class AdderServer : public rclcpp::Node
{
public:
  AdderServer()
  : Node("adder_server")
  {
    service_ = this->create_service<skeleton::srv::AddTwoInts>(
      "add_two_ints", std::bind(&AdderServer::add, this, _1, _2));
  }

private:
  void add(
    const std::shared_ptr<skeleton::srv::AddTwoInts::Request> request,
    std::shared_ptr<skeleton::srv::AddTwoInts::Response> response)
  {
    response->sum = request->a + request->b;
  }

  rclcpp::Service<skeleton::srv::AddTwoInts>::SharedPtr service_;
};

int main(int argc, char ** argv)
{
  rclcpp::init(argc, argv);
  rclcpp::spin(std::make_shared<AdderServer>());
  rclcpp::shutdown();
  return 0;
}
