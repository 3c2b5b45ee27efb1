#include "headsplat/metrics.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

namespace headsplat {

namespace {

template <typename T>
void check_same_size(const ImageT<T>& a, const ImageT<T>& b) {
    if (a.width != b.width || a.height != b.height) {
        throw DimensionMismatch("image sizes differ: " + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " vs " + std::to_string(b.width) +
                                "x" + std::to_string(b.height));
    }
}

double psnr_from_mse(double m) {
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

/// Single-channel plane of doubles.
struct Plane {
    int w = 0, h = 0;
    std::vector<double> v;
    Plane(int w_, int h_) : w(w_), h(h_), v(std::size_t(w_) * h_, 0.0) {}
    double& operator()(int x, int y) { return v[std::size_t(y) * w + x]; }
    double operator()(int x, int y) const { return v[std::size_t(y) * w + x]; }
};

/// Valid-mode separable correlation: output is (w-10) x (h-10).
Plane filter_valid(const Plane& in, const std::vector<double>& k) {
    const int r = static_cast<int>(k.size());
    Plane tmp(in.w - r + 1, in.h);
    for (int y = 0; y < in.h; ++y) {
        for (int x = 0; x < tmp.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < r; ++i) s += k[i] * in(x + i, y);
            tmp(x, y) = s;
        }
    }
    Plane out(tmp.w, in.h - r + 1);
    for (int y = 0; y < out.h; ++y) {
        for (int x = 0; x < out.w; ++x) {
            double s = 0.0;
            for (int i = 0; i < r; ++i) s += k[i] * tmp(x, y + i);
            out(x, y) = s;
        }
    }
    return out;
}

/// Adjoint of filter_valid: scatters a (w-10) x (h-10) plane back to w x h.
Plane filter_valid_adjoint(const Plane& g, const std::vector<double>& k, int w, int h) {
    const int r = static_cast<int>(k.size());
    Plane tmp(g.w, h);
    for (int y = 0; y < g.h; ++y) {
        for (int x = 0; x < g.w; ++x) {
            for (int i = 0; i < r; ++i) tmp(x, y + i) += k[i] * g(x, y);
        }
    }
    Plane out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < g.w; ++x) {
            for (int i = 0; i < r; ++i) out(x + i, y) += k[i] * tmp(x, y);
        }
    }
    return out;
}

template <typename T>
Plane channel(const ImageT<T>& img, int c) {
    Plane p(img.width, img.height);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) p.v[i] = static_cast<double>(img.data[i * 3 + c]);
    return p;
}

Plane product(const Plane& a, const Plane& b) {
    Plane out(a.w, a.h);
    for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

template <typename T>
double ssim_impl(const ImageT<T>& a, const ImageT<T>& b, ImageT<T>* grad_a) {
    check_same_size(a, b);
    if (a.width < kSsimWindow || a.height < kSsimWindow) {
        throw DimensionMismatch("SSIM needs images of at least 11x11");
    }
    const auto k = ssim_kernel();
    const int ow = a.width - kSsimWindow + 1, oh = a.height - kSsimWindow + 1;
    const double count = double(ow) * oh;
    double total = 0.0;
    if (grad_a) *grad_a = ImageT<T>(a.width, a.height);

    for (int c = 0; c < 3; ++c) {
        const Plane x = channel(a, c), y = channel(b, c);
        const Plane mx = filter_valid(x, k), my = filter_valid(y, k);
        const Plane exx = filter_valid(product(x, x), k);
        const Plane eyy = filter_valid(product(y, y), k);
        const Plane exy = filter_valid(product(x, y), k);

        Plane d_mx(ow, oh), d_exx(ow, oh), d_exy(ow, oh);
        double sum = 0.0;
        for (std::size_t i = 0; i < mx.v.size(); ++i) {
            const double ux = mx.v[i], uy = my.v[i];
            const double vx = exx.v[i] - ux * ux, vy = eyy.v[i] - uy * uy;
            const double cxy = exy.v[i] - ux * uy;
            const double n1 = 2.0 * ux * uy + kSsimC1, n2 = 2.0 * cxy + kSsimC2;
            const double d1 = ux * ux + uy * uy + kSsimC1, d2 = vx + vy + kSsimC2;
            const double s = (n1 * n2) / (d1 * d2);
            sum += s;
            if (grad_a) {
                // Partials with respect to the raw moments E[x], E[x^2], E[xy].
                const double inv = 1.0 / (d1 * d2);
                d_mx.v[i] = (2.0 * uy * n2 + n1 * (-2.0 * uy)) * inv - s * (2.0 * ux / d1) +
                            s * (2.0 * ux / d2);
                d_exx.v[i] = -s / d2;
                d_exy.v[i] = 2.0 * n1 * inv;
            }
        }
        total += sum / count;
        if (grad_a) {
            const double scale = 1.0 / (3.0 * count);
            for (auto* p : {&d_mx, &d_exx, &d_exy}) {
                for (auto& v : p->v) v *= scale;
            }
            const Plane g_mx = filter_valid_adjoint(d_mx, k, a.width, a.height);
            const Plane g_exx = filter_valid_adjoint(d_exx, k, a.width, a.height);
            const Plane g_exy = filter_valid_adjoint(d_exy, k, a.width, a.height);
            for (std::size_t i = 0; i < a.pixel_count(); ++i) {
                grad_a->data[i * 3 + c] = static_cast<T>(g_mx.v[i] + 2.0 * x.v[i] * g_exx.v[i] +
                                                         y.v[i] * g_exy.v[i]);
            }
        }
    }
    return total / 3.0;
}

} // namespace

std::vector<double> ssim_kernel() {
    std::vector<double> k(kSsimWindow);
    double sum = 0.0;
    const int half = kSsimWindow / 2;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (auto& v : k) v /= sum;
    return k;
}

template <typename T>
double mse(const ImageT<T>& a, const ImageT<T>& b) {
    check_same_size(a, b);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = double(a.data[i]) - double(b.data[i]);
        acc += d * d;
    }
    return a.data.empty() ? 0.0 : acc / double(a.data.size());
}

template <typename T>
double psnr(const ImageT<T>& a, const ImageT<T>& b) {
    return psnr_from_mse(mse(a, b));
}

template <typename T>
double ssim(const ImageT<T>& a, const ImageT<T>& b) {
    return ssim_impl<T>(a, b, nullptr);
}

template <typename T>
double ssim_with_grad(const ImageT<T>& a, const ImageT<T>& b, ImageT<T>& grad_a) {
    return ssim_impl<T>(a, b, &grad_a);
}

template <typename T>
double region_psnr(const ImageT<T>& a, const ImageT<T>& b, std::span<const std::uint8_t> mask) {
    check_same_size(a, b);
    if (mask.size() != a.pixel_count()) throw DimensionMismatch("mask size mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        for (int c = 0; c < 3; ++c) {
            const double d = double(a.data[i * 3 + c]) - double(b.data[i * 3 + c]);
            acc += d * d;
        }
        n += 3;
    }
    if (n == 0) throw EmptyMask("region mask selects no pixels");
    return psnr_from_mse(acc / double(n));
}

template double mse<float>(const Image&, const Image&);
template double mse<double>(const ImageT<double>&, const ImageT<double>&);
template double psnr<float>(const Image&, const Image&);
template double psnr<double>(const ImageT<double>&, const ImageT<double>&);
template double ssim<float>(const Image&, const Image&);
template double ssim<double>(const ImageT<double>&, const ImageT<double>&);
template double ssim_with_grad<float>(const Image&, const Image&, Image&);
template double ssim_with_grad<double>(const ImageT<double>&, const ImageT<double>&,
                                       ImageT<double>&);
template double region_psnr<float>(const Image&, const Image&, std::span<const std::uint8_t>);
template double region_psnr<double>(const ImageT<double>&, const ImageT<double>&,
                                    std::span<const std::uint8_t>);

double EvalReport::mean_psnr() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.psnr;
    return entries.empty() ? 0.0 : s / double(entries.size());
}

double EvalReport::mean_ssim() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.ssim;
    return entries.empty() ? 0.0 : s / double(entries.size());
}

double EvalReport::mean_region_psnr() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& e : entries) {
        if (!e.has_region) continue;
        s += e.region_psnr;
        ++n;
    }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / double(n);
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(10);
    out << "frame,view,psnr,ssim,region_psnr\n";
    for (const auto& e : entries) {
        out << e.frame << ',' << e.view << ',' << e.psnr << ',' << e.ssim << ',';
        if (e.has_region) out << e.region_psnr;
        out << '\n';
    }
    out << "mean,," << mean_psnr() << ',' << mean_ssim() << ',';
    const double r = mean_region_psnr();
    if (!std::isnan(r)) out << r;
    out << '\n';
}

void EvalReport::write_json(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["entries"] = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json rec = {{"frame", e.frame}, {"view", e.view}, {"psnr", e.psnr},
                              {"ssim", e.ssim}};
        if (e.has_region) rec["region_psnr"] = e.region_psnr;
        j["entries"].push_back(rec);
    }
    j["mean_psnr"] = mean_psnr();
    j["mean_ssim"] = mean_ssim();
    const double r = mean_region_psnr();
    if (!std::isnan(r)) j["mean_region_psnr"] = r;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace headsplat
