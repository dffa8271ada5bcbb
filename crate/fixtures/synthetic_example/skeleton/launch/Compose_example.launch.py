import os

from ament_index_python.packages import get_package_share_directory
from launch import LaunchDescription
from launch.actions import GroupAction, IncludeLaunchDescription
from launch.launch_description_sources import AnyLaunchDescriptionSource
from launch_ros.actions import Node, PushRosNamespace


def generate_launch_description():
    counter = IncludeLaunchDescription(
        AnyLaunchDescriptionSource(
            os.path.join(get_package_share_directory('skeleton'), 'launch', 'counter.launch.xml')
        )
    )
    red = GroupAction([
        PushRosNamespace('red'),
        Node(package='skeleton', executable='foo_node', name='foo',
             remappings=[('number', 'bit_number')]),
        Node(package='skeleton', executable='bar_node', name='bar',
             remappings=[('reset', '/reset')]),
    ])
    return LaunchDescription([counter, red])
