#include "wafer/adam.hpp"

#include <cmath>

#include "wafer/error.hpp"

namespace wafer::nn {

template <typename T>
void Adam<T>::step(std::span<Parameter<T>* const> params) {
  if (m_.empty()) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }
  if (m_.size() != params.size()) {
    throw ShapeError("Adam state holds " + std::to_string(m_.size()) + " buffers, got " +
                     std::to_string(params.size()) + " parameters");
  }
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    auto& m = m_[k];
    auto& v = v_[k];
    if (p.value.shape() != m.shape() || p.grad.shape() != p.value.shape()) {
      throw ShapeError("Adam: shape mismatch for parameter '" + p.name + "'");
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double step = cfg_.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps);
      p.value[i] = static_cast<T>(p.value[i] - step);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace wafer::nn
