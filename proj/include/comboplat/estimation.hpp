#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "comboplat/multiplicity.hpp"

namespace comboplat {

enum class DuplicatePolicy { Error, Mean };

struct CsvSchema {
  char delimiter = ',';
  std::string model_column = "model_id";
  std::string treatment_column = "treatment";
  std::string response_column = "response";
  DuplicatePolicy duplicates = DuplicatePolicy::Error;
  bool flip_sign = false;  // for endpoints where lower is better
};

struct PairedEndpointTable {
  // model_id -> treatment -> response (after duplicate resolution)
  std::map<std::string, std::map<std::string, double>> responses;
  std::size_t rows_read = 0;        // data rows in the source, header excluded
  std::size_t duplicates_merged = 0;

  std::vector<double> arm(const std::string& treatment) const;
  // Models with a response for every listed treatment.
  std::size_t complete_models(const std::vector<std::string>& treatments) const;
};

PairedEndpointTable parse_endpoint_csv(std::istream& in, const CsvSchema& schema = {});
PairedEndpointTable ingest_csv(const std::string& path, const CsvSchema& schema = {});

double pooled_sd(double sd1, long n1, double sd2, long n2);

struct TrialEstimates {
  double rho_AB_A = 0.0;
  double rho_AB_B = 0.0;
  double delta_B = 0.0;
  double delta_AB = 0.0;
  double s_hat = 0.0;  // NaN when delta_B == 0
  long n_A = 0;
  long n_B = 0;
  long n_AB = 0;
  std::string drug_A;
  std::string drug_B;
  std::string combo;
  bool screened_out = false;  // either standardized effect <= 0
};

struct EstimateOptions {
  std::size_t min_triples = 3;
};

TrialEstimates estimate_trial(const PairedEndpointTable& table, const std::string& drug_A, const std::string& drug_B,
                              const std::string& combo, const EstimateOptions& options = {});

// Keys follow the field order of TrialEstimates; non-finite numbers become null.
nlohmann::ordered_json to_json(const TrialEstimates& est);

struct RoleAssignment {
  std::string drug_A;
  std::string drug_B;
  std::string combo;
};

// CSV with header drug_A, drug_B, combo; one trial per row.
std::vector<RoleAssignment> read_roles(const std::string& path, char delimiter = ',');

struct Table1Result {
  double rho = 0.0;
  ErrorRates unadjusted;  // at the unadjusted two-sided 5% critical value
  ThresholdResult fwer;
  ThresholdResult fmer;
  ThresholdResult msfp;
};

// Thresholds for FWER 0.05, FMER 0.0025, MSFP 0.000625 at test correlation
// rho, plus simulated unadjusted error rates.
Table1Result table1_from_rho(double rho, std::size_t replications = 100'000, std::uint64_t seed = 0);

// Chains the arm-level estimates (counts from the data) into table1_from_rho.
Table1Result table1_pipeline(const TrialEstimates& est, std::size_t replications = 100'000, std::uint64_t seed = 0);

}  // namespace comboplat
