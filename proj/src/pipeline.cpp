#include "dpls/pipeline.hpp"

#include <string>

#include "dpls/error.hpp"

namespace dpls {

std::string_view to_string(IvMode mode) {
  return mode == IvMode::rescale_gmm ? "rescale_gmm" : "control_function";
}

std::string_view to_string(OutcomeLink link) {
  return link == OutcomeLink::tobit ? "tobit" : "identity";
}

IvMode parse_iv_mode(std::string_view text) {
  if (text == "rescale_gmm") return IvMode::rescale_gmm;
  if (text == "control_function") return IvMode::control_function;
  throw DataError("unknown mode '" + std::string(text) +
                  "' (expected rescale_gmm or control_function)");
}

OutcomeLink parse_outcome_link(std::string_view text) {
  if (text == "tobit") return OutcomeLink::tobit;
  if (text == "identity") return OutcomeLink::identity;
  throw DataError("unknown outcome link '" + std::string(text) + "' (expected tobit or identity)");
}

Vector DplsIvFit::predict_treatment(const Matrix& zbar) const { return dpls_predict(treatment, zbar); }

Matrix DplsIvFit::outcome_design(const Matrix& zbar, const Vector& p, const Matrix& x) const {
  const Vector p_hat = predict_treatment(zbar);
  if (x.rows() != p_hat.size()) throw DataError("outcome_design: covariate rows mismatch");
  if (mode == IvMode::rescale_gmm) return hcat(p_hat, x);
  if (p.size() != p_hat.size()) throw DataError("outcome_design: policy length mismatch");
  Matrix pe(p.size(), 2);
  pe.col(0) = p;
  pe.col(1) = p - p_hat;
  return hcat(pe, x);
}

Vector DplsIvFit::predict_index(const Matrix& zbar, const Vector& p, const Matrix& x) const {
  return outcome_design(zbar, p, x) * outcome.beta;
}

Vector DplsIvFit::link_transform(const Vector& index) const {
  if (link == OutcomeLink::identity) return index;
  return index.cwiseMax(0.0);
}

Vector DplsIvFit::predict_outcome(const Matrix& zbar, const Vector& p, const Matrix& x) const {
  return link_transform(predict_index(zbar, p, x));
}

Vector DplsIvFit::predict_outcome(const Dataset& ds) const {
  return predict_outcome(augment_instruments(ds.z(), ds.x()).zbar, ds.p(), ds.x());
}

DplsIvFit dpls_iv_fit(const Dataset& ds, const DplsIvConfig& cfg, IvMode mode) {
  const Matrix zbar = augment_instruments(ds.z(), ds.x()).zbar;
  DplsIvFit fit;
  fit.mode = mode;
  fit.link = cfg.link;
  fit.treatment = dpls_fit(zbar, ds.p(), cfg.treatment);
  const Vector p_hat = dpls_predict(fit.treatment, zbar);

  const TobitConstants constants = cfg.link == OutcomeLink::tobit
                                       ? estimate_tobit_constants(ds.y())
                                       : TobitConstants::identity();
  const Vector y_tilde = recenter_outcome(ds.y(), constants);

  if (mode == IvMode::rescale_gmm) {
    fit.outcome = gmm_beta(p_hat, ds.x(), y_tilde, ds.p());
    fit.outcome.constants = constants;
    sandwich_variance(fit.outcome, zbar, cfg.weighting);
  } else {
    ControlFunctionFit cf = control_function_fit(ds.p(), p_hat, ds.x(), y_tilde);
    Matrix pe(ds.n(), 2);
    pe.col(0) = ds.p();
    pe.col(1) = cf.eta_hat;
    TobitGmmFit outcome;
    outcome.design = hcat(pe, ds.x());
    outcome.y_tilde = y_tilde;
    outcome.beta = cf.coef;
    outcome.residuals = y_tilde - outcome.design * cf.coef;
    outcome.constants = constants;
    sandwich_variance(outcome, outcome.design, cfg.weighting);
    fit.outcome = std::move(outcome);
    fit.control = std::move(cf);
  }
  return fit;
}

}  // namespace dpls
