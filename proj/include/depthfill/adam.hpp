#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "depthfill/blocks.hpp"
#include "depthfill/checkpoint.hpp"

namespace depthfill::nn {

/// First-order adaptive-moment update (decay 0.9/0.999, epsilon 1e-8).
template <typename T>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  void attach(const std::vector<Param<T>*>& params) {
    params_ = params;
    m_.clear();
    v_.clear();
    for (const Param<T>* p : params_) {
      m_.emplace_back(p->value.size(), T(0));
      v_.emplace_back(p->value.size(), T(0));
    }
    t_ = 0;
  }

  std::int64_t step_count() const { return t_; }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Param<T>& p = *params_[pi];
      std::vector<T>& m = m_[pi];
      std::vector<T>& v = v_[pi];
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = static_cast<double>(p.grad[i]);
        const double mi = kBeta1 * static_cast<double>(m[i]) + (1.0 - kBeta1) * g;
        const double vi = kBeta2 * static_cast<double>(v[i]) + (1.0 - kBeta2) * g * g;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        p.value[i] -= static_cast<T>(lr * (mi / c1) / (std::sqrt(vi / c2) + kEps));
      }
    }
  }

  void pack(Checkpoint& ck) const {
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      pack_vec(ck, "opt.adam.m." + params_[pi]->name, m_[pi]);
      pack_vec(ck, "opt.adam.v." + params_[pi]->name, v_[pi]);
    }
  }

  void unpack(const Checkpoint& ck, std::int64_t step) {
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      unpack_vec(ck, "opt.adam.m." + params_[pi]->name, m_[pi]);
      unpack_vec(ck, "opt.adam.v." + params_[pi]->name, v_[pi]);
    }
    t_ = step;
  }

 private:
  static void pack_vec(Checkpoint& ck, const std::string& name,
                       const std::vector<T>& v) {
    CheckpointEntry e;
    e.name = name;
    e.shape = {static_cast<int>(v.size())};
    e.data.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) e.data[i] = static_cast<float>(v[i]);
    ck.entries.push_back(std::move(e));
  }
  static void unpack_vec(const Checkpoint& ck, const std::string& name,
                         std::vector<T>& v) {
    const CheckpointEntry* e = ck.find(name);
    if (!e) raise<IntegrityError>("checkpoint missing optimizer tensor '", name, "'");
    if (e->data.size() != v.size())
      raise<IntegrityError>("optimizer tensor '", name, "' size mismatch");
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(e->data[i]);
  }

  std::vector<Param<T>*> params_;
  std::vector<std::vector<T>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace depthfill::nn
