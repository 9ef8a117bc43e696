from .agent import RobotAgent
from .control import Camera, CameraFrame, ControlServer

__all__ = ["RobotAgent", "Camera", "CameraFrame", "ControlServer"]
