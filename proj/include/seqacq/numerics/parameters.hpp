#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace seqacq::numerics {

// Flat parameter storage with an identity and a revision counter. Caches
// produced by a forward pass record both, so a backward pass against a
// different or since-modified model is detected instead of silently
// producing wrong gradients. Copies receive a fresh identity.
class ParameterStore {
 public:
  ParameterStore();
  explicit ParameterStore(std::size_t count);
  ParameterStore(const ParameterStore& other);
  ParameterStore& operator=(const ParameterStore& other);
  ParameterStore(ParameterStore&& other) noexcept;
  ParameterStore& operator=(ParameterStore&& other) noexcept;

  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  // Any mutable access bumps the revision.
  std::span<double> mutable_values();
  void assign(std::span<const double> values);

  std::uint64_t identity() const { return identity_; }
  std::uint64_t revision() const { return revision_; }

  bool operator==(const ParameterStore& other) const {
    return values_ == other.values_;
  }

 private:
  std::vector<double> values_;
  std::uint64_t identity_;
  std::uint64_t revision_ = 0;
};

// FNV-1a over the raw bytes of the parameters. Bit-level, so any change is
// visible.
std::uint64_t checksum(std::span<const double> values,
                       std::uint64_t seed = 0xcbf29ce484222325ULL);

}  // namespace seqacq::numerics
