#pragma once

#include <stdexcept>
#include <string>

namespace naxray
{
//! Input outside the domain of an operation (bad geometry, bad parameter range).
class DomainError : public std::domain_error
{
  public:
    using std::domain_error::domain_error;
};

//! Numerical breakdown: non-finite values, singular matrices.
class NumericError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

//! Input that makes a ratio or estimate meaningless (zero field, zero distance).
class DegenerateInputError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

//! Malformed or unreadable files.
class IoError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};
}  // namespace naxray
