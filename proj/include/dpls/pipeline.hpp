#pragma once

#include <optional>
#include <string_view>

#include "dpls/dataset.hpp"
#include "dpls/iv.hpp"
#include "dpls/network.hpp"

namespace dpls {

enum class IvMode { rescale_gmm, control_function };
/// Outcome transformation tau: tobit censors at zero, identity leaves it alone.
enum class OutcomeLink { tobit, identity };

std::string_view to_string(IvMode mode);
std::string_view to_string(OutcomeLink link);
IvMode parse_iv_mode(std::string_view text);
OutcomeLink parse_outcome_link(std::string_view text);

struct DplsIvConfig {
  DplsConfig treatment;
  OutcomeLink link = OutcomeLink::tobit;
  GWeighting weighting = GWeighting::inverse_meat;
};

/// Treatment network plus outcome regression.
///
/// rescale_gmm: outcome regressors are [p_hat, x], instruments [z, x].
/// control_function: outcome regressors are [p, p - p_hat, x]; the sandwich is
/// the just-identified (heteroskedasticity-robust) case.
/// With the tobit link the outcome is recentred before the regression and
/// predictions are tau(index).
struct DplsIvFit {
  DplsModel treatment;
  IvMode mode = IvMode::control_function;
  OutcomeLink link = OutcomeLink::tobit;
  TobitGmmFit outcome;
  std::optional<ControlFunctionFit> control;

  double policy_effect() const { return outcome.policy_effect(); }
  Vector predict_treatment(const Matrix& zbar) const;
  /// Outcome regressors for new rows (p is used only in control_function mode).
  Matrix outcome_design(const Matrix& zbar, const Vector& p, const Matrix& x) const;
  Vector predict_index(const Matrix& zbar, const Vector& p, const Matrix& x) const;
  Vector predict_outcome(const Matrix& zbar, const Vector& p, const Matrix& x) const;
  Vector predict_outcome(const Dataset& ds) const;
  /// tau applied elementwise.
  Vector link_transform(const Vector& index) const;
};

DplsIvFit dpls_iv_fit(const Dataset& ds, const DplsIvConfig& cfg, IvMode mode);

}  // namespace dpls
