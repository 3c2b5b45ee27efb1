#include "headsplat/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace headsplat {

namespace {

constexpr int kPos = 0;
constexpr int kRot = 3;
constexpr int kScale = 7;
constexpr int kOpacity = 10;
constexpr int kSh = 11;

} // namespace

double position_lr(const LearningRates& lr, double progress) {
    const double t = std::clamp(progress, 0.0, 1.0);
    return lr.position * std::pow(lr.position_final_factor, t);
}

void SplatAdam::resize(std::size_t splat_count) {
    m_.assign(splat_count * kParamsPerSplat, 0.0);
    v_.assign(splat_count * kParamsPerSplat, 0.0);
    steps_.assign(splat_count, 0);
}

std::span<const double> SplatAdam::first_moment(std::size_t splat) const {
    return {m_.data() + splat * kParamsPerSplat, std::size_t(kParamsPerSplat)};
}

void SplatAdam::step(SplatModel& model, std::span<const SplatGrad<double>> grads,
                     std::span<const std::size_t> indices, const LearningRates& lr,
                     double progress) {
    if (model.size() != steps_.size() || grads.size() != model.size()) {
        throw DimensionMismatch("optimizer state, model and gradients disagree in size");
    }
    const int coeffs = sh_coeff_count(model.sh_degree);
    const double lr_pos = position_lr(lr, progress);

    for (auto i : indices) {
        auto& s = model.splats[i];
        const auto& g = grads[i];
        const std::size_t t = ++steps_[i];
        const double bc1 = 1.0 - std::pow(beta1, double(t));
        const double bc2 = 1.0 - std::pow(beta2, double(t));
        double* m = m_.data() + i * kParamsPerSplat;
        double* v = v_.data() + i * kParamsPerSplat;

        auto update = [&](int slot, double& param, double grad, double rate) {
            m[slot] = beta1 * m[slot] + (1.0 - beta1) * grad;
            v[slot] = beta2 * v[slot] + (1.0 - beta2) * grad * grad;
            const double mhat = m[slot] / bc1;
            const double vhat = v[slot] / bc2;
            if (rate != 0.0) param -= rate * mhat / (std::sqrt(vhat) + epsilon);
        };

        for (int a = 0; a < 3; ++a) update(kPos + a, s.xyz_em[a], g.position[a], lr_pos);
        const Vec4 rot_before = s.rot_em;
        for (int a = 0; a < 4; ++a) update(kRot + a, s.rot_em[a], g.rotation[a], lr.rotation);
        if (s.rot_em != rot_before) s.rot_em.normalize();
        for (int a = 0; a < 3; ++a) update(kScale + a, s.log_scale_em[a], g.scale[a], lr.scale);
        update(kOpacity, s.opacity_raw, g.opacity, lr.opacity);
        for (int k = 0; k < coeffs; ++k) {
            for (int c = 0; c < 3; ++c) update(kSh + 3 * k + c, s.sh[k][c], g.sh[k][c], lr.sh);
        }
    }
}

void SplatAdam::remap(std::span<const std::size_t> origin, std::size_t survivors) {
    std::vector<double> m(origin.size() * kParamsPerSplat, 0.0);
    std::vector<double> v(origin.size() * kParamsPerSplat, 0.0);
    std::vector<std::size_t> steps(origin.size(), 0);
    for (std::size_t i = 0; i < survivors && i < origin.size(); ++i) {
        const std::size_t src = origin[i];
        std::copy_n(m_.begin() + src * kParamsPerSplat, kParamsPerSplat, m.begin() + i * kParamsPerSplat);
        std::copy_n(v_.begin() + src * kParamsPerSplat, kParamsPerSplat, v.begin() + i * kParamsPerSplat);
        steps[i] = steps_[src];
    }
    m_ = std::move(m);
    v_ = std::move(v);
    steps_ = std::move(steps);
}

} // namespace headsplat
