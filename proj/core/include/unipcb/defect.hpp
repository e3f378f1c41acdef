#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "unipcb/errors.hpp"

namespace unipcb {

// The six PCB defect categories handled throughout the project.
enum class DefectClass {
    Short = 0,
    Spur,
    SpuriousCopper,
    Open,
    MouseBite,
    HoleBreakout,
};

inline constexpr std::size_t kNumDefectClasses = 6;

/// Canonical display name ("short", "mouse bite", "spurious copper", ...).
std::string_view defect_class_name(DefectClass c);

/// Parses a display name; underscores are accepted in place of spaces.
DefectClass defect_class_from_name(std::string_view name);

/// Axis-aligned box, top-left origin, pixel units.
struct Box {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double cx() const { return x + w / 2.0; }
    double cy() const { return y + h / 2.0; }

    void validate() const {
        if (!(w > 0.0) || !(h > 0.0)) {
            throw ValidationError("box: width and height must be positive");
        }
    }
};

/// One annotated defect: category plus its bounding box.
struct DefectInstance {
    DefectClass classId = DefectClass::Short;
    Box box;
};

} // namespace unipcb
