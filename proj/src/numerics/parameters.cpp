#include "seqacq/numerics/parameters.hpp"

#include <atomic>
#include <cstring>

#include "seqacq/errors.hpp"

namespace seqacq::numerics {
namespace {

std::uint64_t next_identity() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace

ParameterStore::ParameterStore() : identity_(next_identity()) {}

ParameterStore::ParameterStore(std::size_t count)
    : values_(count, 0.0), identity_(next_identity()) {}

ParameterStore::ParameterStore(const ParameterStore& other)
    : values_(other.values_), identity_(next_identity()) {}

ParameterStore& ParameterStore::operator=(const ParameterStore& other) {
  if (this != &other) {
    values_ = other.values_;
    ++revision_;
  }
  return *this;
}

ParameterStore::ParameterStore(ParameterStore&& other) noexcept
    : values_(std::move(other.values_)),
      identity_(other.identity_),
      revision_(other.revision_) {
  other.identity_ = next_identity();
  other.revision_ = 0;
}

ParameterStore& ParameterStore::operator=(ParameterStore&& other) noexcept {
  if (this != &other) {
    values_ = std::move(other.values_);
    ++revision_;
    other.identity_ = next_identity();
    other.revision_ = 0;
  }
  return *this;
}

std::span<double> ParameterStore::mutable_values() {
  ++revision_;
  return values_;
}

void ParameterStore::assign(std::span<const double> values) {
  if (values.size() != values_.size()) {
    throw ShapeError("parameter assign: expected " +
                     std::to_string(values_.size()) + " values, got " +
                     std::to_string(values.size()));
  }
  values_.assign(values.begin(), values.end());
  ++revision_;
}

std::uint64_t checksum(std::span<const double> values, std::uint64_t seed) {
  std::uint64_t hash = seed;
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      hash ^= b;
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

}  // namespace seqacq::numerics
