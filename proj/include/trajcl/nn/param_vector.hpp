#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trajcl::nn {

struct LayoutEntry {
  std::string name;
  std::vector<std::size_t> shape;

  std::size_t size() const;
  bool operator==(const LayoutEntry&) const = default;
};

/// Flat parameter storage plus the (name, shape) manifest that maps it onto
/// layer weights and biases. Blocks are stored contiguously in layout order.
class ParamVector {
 public:
  ParamVector() = default;
  /// Zero-filled storage for the given layout.
  explicit ParamVector(std::vector<LayoutEntry> layout);
  /// Throws ConfigError if values.size() does not match the layout.
  ParamVector(std::vector<LayoutEntry> layout, std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  const std::vector<LayoutEntry>& layout() const { return layout_; }

  std::size_t block_count() const { return layout_.size(); }
  std::span<double> block(std::size_t index);
  std::span<const double> block(std::size_t index) const;

  /// One vector per layout entry.
  std::vector<std::vector<double>> unflatten() const;
  static ParamVector flatten(std::vector<LayoutEntry> layout,
                             const std::vector<std::vector<double>>& blocks);

  bool all_finite() const;
  bool same_layout(const ParamVector& other) const { return layout_ == other.layout_; }
  void fill(double v);

  bool operator==(const ParamVector&) const = default;

 private:
  std::vector<LayoutEntry> layout_;
  std::vector<std::size_t> offsets_;
  std::vector<double> values_;
};

}  // namespace trajcl::nn
