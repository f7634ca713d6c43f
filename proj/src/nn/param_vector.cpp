#include "trajcl/nn/param_vector.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "trajcl/errors.hpp"

namespace trajcl::nn {

std::size_t LayoutEntry::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

ParamVector::ParamVector(std::vector<LayoutEntry> layout) : layout_(std::move(layout)) {
  std::size_t total = 0;
  offsets_.reserve(layout_.size());
  for (const auto& e : layout_) {
    offsets_.push_back(total);
    total += e.size();
  }
  values_.assign(total, 0.0);
}

ParamVector::ParamVector(std::vector<LayoutEntry> layout, std::vector<double> values)
    : ParamVector(std::move(layout)) {
  if (values.size() != values_.size()) {
    throw ConfigError("parameter count " + std::to_string(values.size()) +
                      " does not match layout total " + std::to_string(values_.size()));
  }
  values_ = std::move(values);
}

std::span<double> ParamVector::block(std::size_t index) {
  return std::span<double>(values_).subspan(offsets_.at(index), layout_[index].size());
}

std::span<const double> ParamVector::block(std::size_t index) const {
  return std::span<const double>(values_).subspan(offsets_.at(index),
                                                  layout_[index].size());
}

std::vector<std::vector<double>> ParamVector::unflatten() const {
  std::vector<std::vector<double>> out;
  out.reserve(layout_.size());
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const auto b = block(i);
    out.emplace_back(b.begin(), b.end());
  }
  return out;
}

ParamVector ParamVector::flatten(std::vector<LayoutEntry> layout,
                                 const std::vector<std::vector<double>>& blocks) {
  if (blocks.size() != layout.size()) {
    throw ConfigError("block count does not match layout");
  }
  ParamVector p(std::move(layout));
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    auto dst = p.block(i);
    if (blocks[i].size() != dst.size()) {
      throw ConfigError("block '" + p.layout_[i].name + "' has wrong size");
    }
    std::copy(blocks[i].begin(), blocks[i].end(), dst.begin());
  }
  return p;
}

bool ParamVector::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

void ParamVector::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

}  // namespace trajcl::nn
