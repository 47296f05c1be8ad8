#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace hinf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class NotSkewSymmetric : public Error
{
public:
  using Error::Error;
};

class NotARotation : public Error
{
public:
  using Error::Error;
};

/// log_so3 refuses to pick an axis this close to a half turn.
class NearPiRotation : public Error
{
public:
  NearPiRotation(double angle)
      : Error("rotation angle " + std::to_string(angle) + " rad is within 1e-6 of pi; axis is ill-defined"),
        angle_(angle)
  {
  }
  double angle() const noexcept { return angle_; }

private:
  double angle_;
};

class NotNearRotation : public Error
{
public:
  using Error::Error;
};

class NotUnitVector : public Error
{
public:
  using Error::Error;
};

class UnknownProfile : public Error
{
public:
  using Error::Error;
};

class UnknownScenario : public Error
{
public:
  using Error::Error;
};

class InvalidScenario : public Error
{
public:
  using Error::Error;
};

class InvalidParams : public Error
{
public:
  using Error::Error;
};

class DegenerateDirections : public Error
{
public:
  using Error::Error;
};

class IoError : public Error
{
public:
  using Error::Error;
};

/**
 * Raised when a gain update leaves the symmetric positive definite cone or
 * grows past the configured entry limit. For the H-infinity filter this is
 * the signature of a gamma chosen too small for the Riccati solution to
 * exist.
 */
class FilterDiverged : public Error
{
public:
  FilterDiverged(std::string filter, double t, std::string reason)
      : Error(filter + " diverged at t=" + std::to_string(t) + ": " + reason),
        filter_(std::move(filter)),
        t_(t),
        reason_(std::move(reason))
  {
  }

  const std::string& filter() const noexcept { return filter_; }
  double time() const noexcept { return t_; }
  const std::string& reason() const noexcept { return reason_; }

private:
  std::string filter_;
  double t_;
  std::string reason_;
};

}  // namespace hinf
