#pragma once

#include <string>

#include "dpls/io.hpp"
#include "dpls/linear.hpp"
#include "dpls/network.hpp"
#include "dpls/pipeline.hpp"
#include "dpls/pls.hpp"
#include "dpls/synthetic.hpp"

namespace dpls {

inline constexpr std::string_view kModelFormat = "dpls-model/1";
inline constexpr std::string_view kTruthFormat = "dpls-truth/1";

/// Every writer stores values under `prefix` (e.g. "treatment.") and the
/// matching reader restores them bit-exactly. PLS scores are not stored.
void write_linear_fit(KvDocument& doc, const std::string& prefix, const LinearFit& fit);
LinearFit read_linear_fit(const KvDocument& doc, const std::string& prefix);

void write_pls_fit(KvDocument& doc, const std::string& prefix, const PlsFit& fit);
PlsFit read_pls_fit(const KvDocument& doc, const std::string& prefix);

void write_dpls_model(KvDocument& doc, const std::string& prefix, const DplsModel& model);
DplsModel read_dpls_model(const KvDocument& doc, const std::string& prefix);

void write_tobit_constants(KvDocument& doc, const std::string& prefix, const TobitConstants& c);
TobitConstants read_tobit_constants(const KvDocument& doc, const std::string& prefix);

void write_gmm_fit(KvDocument& doc, const std::string& prefix, const TobitGmmFit& fit);
TobitGmmFit read_gmm_fit(const KvDocument& doc, const std::string& prefix);

void write_dpls_iv_fit(KvDocument& doc, const std::string& prefix, const DplsIvFit& fit);
DplsIvFit read_dpls_iv_fit(const KvDocument& doc, const std::string& prefix);

void write_parameters(KvDocument& doc, const std::string& prefix, const TrueParameters& t);
TrueParameters read_parameters(const KvDocument& doc, const std::string& prefix);

/// Truth sidecar: parameters, noise vectors, instrument covariance and graph.
KvDocument truth_document(const SyntheticSpec& spec, const GroundTruth& truth);

}  // namespace dpls
