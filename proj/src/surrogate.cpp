#include "adbatch/surrogate.hpp"

#include <sstream>

namespace adbatch {

namespace {

class GpSurrogate final : public Surrogate {
 public:
  static GPModel initial_model(ReplicatedDesign design, const MetamodelConfig& cfg) {
    const int d = design.dim();
    return GPModel(std::move(design), KernelParams::isotropic(d, 0.5, 1.0),
                   Homoskedastic{cfg.tau2});
  }

  GpSurrogate(ReplicatedDesign design, const MetamodelConfig& cfg)
      : cfg_(cfg), model_(initial_model(std::move(design), cfg)) {}

  long k() const override { return model_.k(); }
  const ReplicatedDesign& design() const override { return model_.design(); }
  const KernelParams& kernel_params() const override { return model_.kernel(); }

  std::pair<double, double> posterior(const Vec& x) const override {
    return model_.posterior(x);
  }
  void posterior_batch(const Mat& Xstar, Vec& mean, Vec& sd) const override {
    model_.posterior_batch(Xstar, mean, sd);
  }
  double posterior_cov(const Vec& a, const Vec& b) const override {
    return model_.posterior_cov(a, b);
  }
  Vec posterior_cov_batch(const Mat& Xstar, const Vec& x) const override {
    const Mat ks = kernel_cross_matrix(Xstar, model_.design().inputs, model_.kernel());
    const Vec kx = kernel_cross(model_.design().inputs, x, model_.kernel());
    const Vec w = model_.solve_sigma(kx);
    Vec out(Xstar.rows());
    for (long j = 0; j < Xstar.rows(); ++j) {
      out[j] = kernel_eval(Xstar.row(j).transpose(), x, model_.kernel()) -
               ks.row(j).dot(w);
    }
    return out;
  }

  double noise_c(const Vec& x) const override { return model_.effective_noise_var(x); }

  double lookahead_sd_new(const Vec& x, long r) const override {
    return model_.lookahead_sd_new(x, r);
  }
  double lookahead_var_at_test_new(const Vec& x_new, long dr, const Vec& x_star) const override {
    return model_.lookahead_var_at_test_new(x_new, dr, x_star);
  }
  Vec lookahead_var_realloc(const std::vector<long>& dr, const Mat& Xstar) const override {
    return model_.lookahead_var_realloc(dr, Xstar);
  }

  Vec alloc_vector(const Mat& Kstar, const Vec& omega) const override {
    return model_.solve_sigma(Vec(Kstar.transpose() * omega));
  }
  Vec alloc_site_scale() const override {
    Vec s(model_.k());
    for (long i = 0; i < model_.k(); ++i) {
      s[i] = noise_var_at(model_.noise(), model_.design().inputs.row(i).transpose());
    }
    return s;
  }

  void append_batch(const Vec& x, long r, double ybar) override {
    model_ = model_.append_batch(x, r, ybar);
  }
  void add_replicates(long i, long dr, double sum_y) override {
    model_ = model_.add_replicates(i, dr, sum_y);
  }

  void refit(RngStream& rng, bool initial) override {
    const auto mode =
        cfg_.fit_noise ? NoiseFitMode::FitConstantTau2 : NoiseFitMode::FixedTau2;
    const double tau2 = cfg_.fit_noise ? current_tau2() : cfg_.tau2;
    const int starts = initial ? cfg_.fit_starts : cfg_.refit_starts;
    const FitResult fit = fit_hyperparameters(model_.design(), mode, tau2, cfg_.bounds,
                                              starts, rng, model_.kernel());
    if (fit.ok) {
      model_ = GPModel(model_.design(), fit.kernel, fit.noise);
    }
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "gp(tau2=" << current_tau2() << ", fit_noise=" << cfg_.fit_noise << ")";
    return os.str();
  }

 private:
  double current_tau2() const { return std::get<Homoskedastic>(model_.noise()).tau2; }

  MetamodelConfig cfg_;
  GPModel model_;
};

class TgpSurrogate final : public Surrogate {
 public:
  static TGPModel initial_model(ReplicatedDesign design, const MetamodelConfig& cfg) {
    const int d = design.dim();
    return TGPModel(std::move(design),
                    TGPParams{10.0, cfg.tau2, KernelParams::isotropic(d, 0.5, 1.0)});
  }

  TgpSurrogate(ReplicatedDesign design, const MetamodelConfig& cfg)
      : cfg_(cfg), model_(initial_model(std::move(design), cfg)) {}

  long k() const override { return model_.k(); }
  const ReplicatedDesign& design() const override { return model_.design(); }
  const KernelParams& kernel_params() const override { return model_.params().kernel; }

  std::pair<double, double> posterior(const Vec& x) const override {
    return model_.posterior(x);
  }
  void posterior_batch(const Mat& Xstar, Vec& mean, Vec& sd) const override {
    model_.posterior_batch(Xstar, mean, sd);
  }
  double posterior_cov(const Vec& a, const Vec& b) const override {
    return model_.posterior_cov(a, b);
  }
  Vec posterior_cov_batch(const Mat& Xstar, const Vec& x) const override {
    Vec out(Xstar.rows());
    for (long j = 0; j < Xstar.rows(); ++j) {
      out[j] = model_.posterior_cov(Xstar.row(j).transpose(), x);
    }
    return out;
  }

  double noise_c(const Vec&) const override {
    return model_.params().inflation() * model_.params().tau2;
  }

  double lookahead_sd_new(const Vec& x, long r) const override {
    return model_.lookahead_sd_new(x, r);
  }
  double lookahead_var_at_test_new(const Vec& x_new, long dr, const Vec& x_star) const override {
    return model_.lookahead_var_at_test_new(x_new, dr, x_star);
  }
  Vec lookahead_var_realloc(const std::vector<long>& dr, const Mat& Xstar) const override {
    return model_.lookahead_var_realloc(dr, Xstar);
  }

  Vec alloc_vector(const Mat& Kstar, const Vec& omega) const override {
    return model_.alloc_vector(Kstar, omega);
  }
  Vec alloc_site_scale() const override { return Vec::Ones(model_.k()); }

  void append_batch(const Vec& x, long r, double ybar) override {
    model_ = model_.append_batch(x, r, ybar);
  }
  void add_replicates(long i, long dr, double sum_y) override {
    model_ = model_.add_replicates(i, dr, sum_y);
  }

  void refit(RngStream& rng, bool initial) override {
    const TgpFitResult fit =
        fit_tgp(model_.design(), cfg_.bounds, rng, model_.params(), initial);
    if (fit.ok) {
      model_ = TGPModel(model_.design(), fit.params);
    }
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "tgp(nu=" << model_.params().nu << ", tau2=" << model_.params().tau2 << ")";
    return os.str();
  }

 private:
  MetamodelConfig cfg_;
  TGPModel model_;
};

}  // namespace

std::unique_ptr<Surrogate> make_surrogate(ReplicatedDesign design,
                                          const MetamodelConfig& config) {
  if (config.kind == MetamodelConfig::Kind::Tgp) {
    return std::make_unique<TgpSurrogate>(std::move(design), config);
  }
  return std::make_unique<GpSurrogate>(std::move(design), config);
}

}  // namespace adbatch
