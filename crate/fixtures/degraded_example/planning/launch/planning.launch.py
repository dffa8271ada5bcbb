from launch import LaunchDescription
from launch_ros.actions import Node


def generate_launch_description():
    return LaunchDescription([
        Node(package='planning', executable='localizer_node', name='localizer',
             remappings=[('odom', '/sensing/odom')]),
        Node(package='planning', executable='planner_node', name='planner',
             remappings=[('goal', '/mission/goal')]),
    ])
