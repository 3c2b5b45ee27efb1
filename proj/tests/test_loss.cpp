#include "headsplat/avatar.hpp"
#include "headsplat/loss.hpp"
#include "headsplat/metrics.hpp"
#include "support/cases.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

namespace headsplat {
namespace {

using namespace headsplat::testing;

TEST(RgbLoss, IdenticalIsZero) {
    const auto a = random_image<float>(1, 16, 16);
    const auto r = rgb_loss(a, a);
    EXPECT_EQ(r.l1, 0.0);
    EXPECT_NEAR(r.dssim, 0.0, 1e-7);
}

TEST(RgbLoss, ConstantOffsetL1) {
    // Values on a 1/64 grid keep the float offset exact.
    Image a(16, 16);
    Rng rng(2);
    for (auto& v : a.data) v = float(rng.integer(0, 48)) / 64.0f;
    Image b = a;
    for (auto& v : b.data) v += 0.1f;
    EXPECT_NEAR(rgb_loss(b, a).l1, 0.1, 1e-7);
}

TEST(RgbLoss, DimensionMismatch) {
    Image g;
    EXPECT_THROW(rgb_loss(Image(12, 12), Image(12, 13)), DimensionMismatch);
    EXPECT_THROW(rgb_loss_with_grad(Image(12, 12), Image(13, 12), 0.2, g), DimensionMismatch);
}

TEST(RgbLoss, WithGradAgreesWithPlain) {
    const auto a = random_image<float>(3, 20, 16);
    const auto b = random_image<float>(4, 20, 16);
    Image g;
    const auto x = rgb_loss_with_grad(a, b, 0.2, g);
    const auto y = rgb_loss(a, b);
    EXPECT_NEAR(x.l1, y.l1, 1e-12);
    EXPECT_NEAR(x.dssim, y.dssim, 1e-9);
}

TEST(RgbLoss, GradientMatchesFiniteDifferences) {
    // Double-precision SSIM gradient plus the analytic L1 sign term, checked
    // against central differences of the loss on pixels away from L1 kinks.
    const auto a = random_image<float>(5, 14, 12);
    const auto b = random_image<float>(6, 14, 12);
    const double lambda = 0.2;
    Image g;
    rgb_loss_with_grad(a, b, lambda, g);
    const auto ad = a.cast<double>();
    const auto bd = b.cast<double>();
    auto objective = [&](const ImageT<double>& img) {
        double acc = 0.0;
        for (std::size_t i = 0; i < img.data.size(); ++i) acc += std::abs(img.data[i] - bd.data[i]);
        return (1 - lambda) * acc / double(img.data.size()) + lambda * dssim(img, bd);
    };
    for (std::size_t i = 0; i < ad.data.size(); i += 7) {
        if (std::abs(ad.data[i] - bd.data[i]) < 1e-3) continue;
        auto probe = ad;
        const double numeric = central_difference(
            [&](double v) {
                probe.data[i] = v;
                return objective(probe);
            },
            ad.data[i], 1e-6);
        EXPECT_NEAR(g.data[i], numeric, 1e-6 + 1e-3 * std::abs(numeric));
    }
}

TEST(Assemble, MatchesRecomputationForEachLambda) {
    Rng rng(7);
    for (double lambda : {0.0, 0.2, 1.0}) {
        for (int i = 0; i < 100; ++i) {
            LossTerms t;
            t.l1 = rng.uniform();
            t.dssim = rng.uniform();
            t.scaling = rng.uniform(0, 0.1);
            const double ws = rng.uniform(0, 2);
            const double total = assemble_total(t, lambda, ws);
            EXPECT_NEAR(total, (1 - lambda) * t.l1 + lambda * t.dssim + ws * t.scaling, 1e-9);
        }
    }
}

TEST(Assemble, LambdaEndpointsIgnoreOtherTerm) {
    LossTerms a{0.3, 0.6, 0.01, 0.0};
    LossTerms b = a;
    b.dssim = 0.9;
    EXPECT_EQ(assemble_total(a, 0.0, 1.0), assemble_total(b, 0.0, 1.0));
    LossTerms c = a;
    c.l1 = 0.05;
    EXPECT_EQ(assemble_total(a, 1.0, 1.0), assemble_total(c, 1.0, 1.0));
}

TEST(ScalingLoss, HandCases) {
    const double tiny = std::ldexp(1.0, -60);
    const double small = std::log(tiny / 4);

    HandModel zero;
    const auto f0 = zero.add_face(tiny);
    zero.add_splat(f0, Vec3::Constant(small));
    zero.add_splat(f0, Vec3::Constant(small));
    EXPECT_EQ(scaling_loss(zero.model, zero.areas), 0.0);

    // One component exceeds its bound by 0.1; 0.1 itself does not survive a
    // log/exp round trip, so the bound is placed 0.1 below an exp() value.
    HandModel one;
    const double l = std::log(0.15);
    const double v = std::exp(l);
    const auto f1 = one.add_face(v - 0.1);
    ASSERT_EQ(drift_bound(one.areas[f1]), v - 0.1);
    ASSERT_EQ(v - drift_bound(one.areas[f1]), 0.1);
    one.add_splat(f1, Vec3(small, l, small));
    one.add_splat(f1, Vec3::Constant(small));
    EXPECT_EQ(scaling_loss(one.model, one.areas), 0.1);

    // 0.3 and 0.4 round-trip exactly; a 2^-60 bound vanishes when subtracted.
    HandModel two;
    const auto f2 = two.add_face(tiny);
    ASSERT_EQ(std::exp(std::log(0.3)), 0.3);
    ASSERT_EQ(std::exp(std::log(0.4)), 0.4);
    two.add_splat(f2, Vec3(std::log(0.3), small, small));
    two.add_splat(f2, Vec3(small, small, std::log(0.4)));
    EXPECT_EQ(scaling_loss(two.model, two.areas), 0.5);
}

TEST(ScalingLoss, ExactlyAtBoundIsZero) {
    HandModel h;
    const double l = std::log(0.02);
    const auto f = h.add_face(std::exp(l));
    h.add_splat(f, Vec3::Constant(l));
    ASSERT_EQ(std::exp(l), drift_bound(h.areas[f]));
    EXPECT_EQ(scaling_loss(h.model, h.areas), 0.0);
}

TEST(ScalingLoss, SubsetRestrictsTerms) {
    const double tiny = std::ldexp(1.0, -60);
    const double small = std::log(tiny / 4);
    HandModel h;
    const auto f = h.add_face(tiny);
    h.add_splat(f, Vec3(std::log(0.3), small, small));
    h.add_splat(f, Vec3(small, small, std::log(0.4)));
    const std::vector<std::size_t> only_second = {1};
    EXPECT_EQ(scaling_loss(h.model, h.areas, std::span<const std::size_t>(only_second)), 0.4);
    const std::vector<std::size_t> none;
    EXPECT_EQ(scaling_loss(h.model, h.areas, std::span<const std::size_t>(none)), 0.0);
}

TEST(ScalingLoss, GradientMatchesFiniteDifferences) {
    Rng rng(8);
    const TriMesh mesh = grid_mesh(2, 0.1);
    const auto areas = face_areas(mesh.vertices, mesh.faces);
    SplatModel model = init_splats(mesh);
    for (auto& s : model.splats) s.log_scale_em += rng.vec3(-0.5, 1.5);
    std::vector<Vec3> grad;
    const double loss = scaling_loss_with_grad(model, areas, std::nullopt, grad);
    ASSERT_GT(loss, 0.0);
    for (std::size_t i = 0; i < model.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            SplatModel probe = model;
            const double x = model.splats[i].log_scale_em[a];
            const double bound = drift_bound(areas[model.splats[i].parent_face]);
            if (std::abs(std::exp(x) - bound) < 1e-4) continue; // kink
            const double numeric = central_difference(
                [&](double v) {
                    probe.splats[i].log_scale_em[a] = v;
                    return scaling_loss(probe, areas);
                },
                x, 1e-6);
            EXPECT_NEAR(grad[i][a], numeric, 1e-7 + 1e-5 * std::abs(numeric));
        }
    }
}

TEST(ScalingLoss, CompliantModelHasZeroGradient) {
    const TriMesh mesh = grid_mesh(2, 0.1);
    const auto areas = face_areas(mesh.vertices, mesh.faces);
    const SplatModel model = init_splats(mesh);
    std::vector<Vec3> grad;
    EXPECT_EQ(scaling_loss_with_grad(model, areas, std::nullopt, grad), 0.0);
    ASSERT_EQ(grad.size(), model.size());
    for (const auto& g : grad) EXPECT_EQ(g, Vec3::Zero());
}

} // namespace
} // namespace headsplat
