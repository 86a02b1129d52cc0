#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace sdfdc
{
    using Vec3 = Eigen::Vector3d;
    using Mat3 = Eigen::Matrix3d;

    /// Base class for every error raised by the library.
    class Error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Malformed input file. Carries the byte offset where parsing stopped.
    class ParseError : public Error
    {
    public:
        ParseError(const std::string & what, std::size_t offset)
            : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

        std::size_t offset() const noexcept { return offset_; }

    private:
        std::size_t offset_;
    };

    class DomainError : public Error { public: using Error::Error; };
    class PreconditionError : public Error { public: using Error::Error; };
    class DegenerateError : public Error { public: using Error::Error; };
    class ConsistencyError : public Error { public: using Error::Error; };
    class EmptySurfaceError : public Error { public: using Error::Error; };

    struct Aabb
    {
        Vec3 min = Vec3::Constant(std::numeric_limits<double>::infinity());
        Vec3 max = Vec3::Constant(-std::numeric_limits<double>::infinity());

        void extend(const Vec3 & p)
        {
            min = min.cwiseMin(p);
            max = max.cwiseMax(p);
        }

        void extend(const Aabb & b)
        {
            min = min.cwiseMin(b.min);
            max = max.cwiseMax(b.max);
        }

        bool empty() const { return (max.array() < min.array()).any(); }
        Vec3 extent() const { return empty() ? Vec3::Zero() : Vec3(max - min); }
        Vec3 center() const { return 0.5 * (min + max); }

        /// Squared distance from p to the box (0 inside).
        double distance_sq(const Vec3 & p) const
        {
            const Vec3 d = (min - p).cwiseMax(Vec3::Zero()).cwiseMax(p - max);
            return d.squaredNorm();
        }
    };
} // namespace sdfdc
