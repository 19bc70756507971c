// Simulate a randomized experiment, fit the outcome network, and report the ATE.

#include <cstdio>

#include "dnnci/dnnci.hpp"

int main() {
    using namespace dnnci;

    DgpSpec dgp;
    dgp.d = 20;
    dgp.n = 10000;
    dgp.coef_seed = 7;
    const auto coefs = draw_coefficients(dgp);
    const auto data = generate_sample(coefs, dgp, 42);

    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 128;
    cfg.epochs = 30;
    cfg.validation_fraction = 0.0;
    cfg.seed = 1;
    const auto arch = ArchitectureSpec::mlp(dgp.d, {20, 15, 5}, 2);
    const auto outcome = fit_joint(data.X, data.y, data.t, arch, cfg);

    // Treatment was randomized, so the propensity is the sample treatment share.
    const auto nuis = NuisanceEstimates::from_models(outcome);
    const auto est = ate(data, nuis).report;

    std::printf("true ATE      %.4f\n", true_ate(coefs, dgp));
    std::printf("estimated ATE %.4f (se %.4f), 95%% CI [%.4f, %.4f]\n", est.estimate, est.std_error, est.ci_low,
                est.ci_high);
}
