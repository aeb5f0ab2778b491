#pragma once

#include <stdexcept>
#include <string>

#include "tcs/linalg.hpp"

namespace tcs {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OutOfAtlas : public Error {
public:
    explicit OutOfAtlas(const std::string& what) : Error("point outside atlas: " + what) {}
};

class DimensionMismatch : public Error {
public:
    explicit DimensionMismatch(const std::string& what) : Error("dimension mismatch: " + what) {}
};

/// Trajectory left the atlas; `time` is the last time the flow was inside.
class Escape : public Error {
public:
    explicit Escape(double t) : Error("trajectory escaped the atlas at t=" + std::to_string(t)), time(t) {}
    double time;
};

class UnresolvedSelector : public Error {
public:
    explicit UnresolvedSelector(const std::string& what) : Error("unresolved schedule selector: " + what) {}
};

class EmptyRestriction : public Error {
public:
    EmptyRestriction() : Error("restriction to an empty box") {}
};

class ControlOutOfSet : public Error {
public:
    explicit ControlOutOfSet(const std::string& what) : Error("control outside control set: " + what) {}
};

class NotSubmersion : public Error {
public:
    explicit NotSubmersion(const Vec& p)
        : Error("map is not a submersion at " + format_vec(p)), point(p) {}
    Vec point;
};

class SingularGram : public Error {
public:
    explicit SingularGram(const Vec& p)
        : Error("J G^-1 J^T is numerically singular at " + format_vec(p)), point(p) {}
    Vec point;
};

class NotAdapted : public Error {
public:
    explicit NotAdapted(const std::string& what) : Error("charts are not adapted: " + what) {}
};

class NotInKernel : public Error {
public:
    NotInKernel(int index, const Vec& p)
        : Error("kernel generator " + std::to_string(index) + " leaves ker dPhi at " + format_vec(p)),
          generator(index), point(p) {}
    int generator;
    Vec point;
};

class RankDeficient : public Error {
public:
    explicit RankDeficient(const Vec& p)
        : Error("kernel generators do not span ker dPhi at " + format_vec(p)), point(p) {}
    Vec point;
};

class IndependenceViolated : public Error {
public:
    explicit IndependenceViolated(const std::string& what) : Error("linear independence violated: " + what) {}
};

class UnmappedControl : public Error {
public:
    explicit UnmappedControl(const std::string& what) : Error("lifting map does not cover control " + what) {}
};

class FrameNotKernel : public Error {
public:
    explicit FrameNotKernel(const std::string& what) : Error("frame is not a kernel frame of the lift: " + what) {}
};

class ParseError : public Error {
public:
    ParseError(int line_no, const std::string& message)
        : Error("line " + std::to_string(line_no) + ": " + message), line(line_no) {}
    int line;
};

class UnresolvedReference : public Error {
public:
    explicit UnresolvedReference(const std::string& ref) : Error("unresolved reference '" + ref + "'"), name(ref) {}
    std::string name;
};

} // namespace tcs
