#pragma once

#include <string>
#include <vector>

#include "mlfield/field/camera.hpp"
#include "mlfield/nav/graph.hpp"

namespace mlfield::nav {

inline constexpr int kDefaultFrameCount = 150;

// Segmentwise visits every keypoint; Literal evaluates the straight-line
// telescoped sum T_1 + (i/M) * sum_v (T_v - T_{v-1}).
enum class InterpolationMode { Segmentwise, Literal };
// Slerp on unit quaternions, or linear blending of matrices followed by
// projection back onto SO(3).
enum class RotationMode { Slerp, LinearMatrix };

// Poses at the path's keypoints: node positions and rotations with the
// intrinsics of `intrinsics`.
std::vector<field::CameraPose> keypoint_poses(const KeypointGraph& graph, const NavPath& path,
                                              const field::CameraPose& intrinsics);

// Frames per segment: every segment gets at least one and the remaining
// frames go one at a time to the segment with the longest step, lower index
// on ties. Throws InvalidInput when frames < number of segments.
std::vector<int> allocate_frames(std::span<const double> segment_lengths, int frames);

// M + 1 poses, frame 0 at the first keypoint and frame M at the last. Throws
// InvalidInput on an empty path, M < 1, or (segmentwise) M below the
// segment count.
std::vector<field::CameraPose> interpolate_path(std::span<const field::CameraPose> keyposes,
                                                int frames = kDefaultFrameCount,
                                                InterpolationMode mode = InterpolationMode::Segmentwise,
                                                RotationMode rotation = RotationMode::Slerp);

enum class Direction { Forward, Back, Left, Right, Up, Down };

const char* to_string(Direction d);
// Throws InvalidInput for anything but the six direction names.
Direction parse_direction(const std::string& s);

// T' = T + d * R * u with u the camera-frame axis of the direction (y down).
// Throws InvalidInput for d < 0.
field::CameraPose move_camera(const field::CameraPose& pose, Direction direction, double d);

}  // namespace mlfield::nav
