from launch import LaunchDescription
from launch.actions import DeclareLaunchArgument, GroupAction, IncludeLaunchDescription
from launch.conditions import IfCondition
from launch.launch_description_sources import PythonLaunchDescriptionSource
from launch.substitutions import LaunchConfiguration, PathJoinSubstitution
from launch_ros.actions import Node, PushRosNamespace
from launch_ros.substitutions import FindPackageShare


def generate_launch_description():
    use_monitor = LaunchConfiguration('use_monitor')
    compose = IncludeLaunchDescription(
        PythonLaunchDescriptionSource([
            PathJoinSubstitution([FindPackageShare('skeleton'), 'launch', 'Compose_example.launch.py'])
        ])
    )
    return LaunchDescription([
        DeclareLaunchArgument('use_monitor', default_value='false'),
        GroupAction([
            PushRosNamespace('robot1'),
            compose,
        ]),
        Node(package='skeleton', executable='monitor_node', name='monitor',
             condition=IfCondition(use_monitor)),
    ])
