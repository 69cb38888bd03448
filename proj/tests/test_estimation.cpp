#include <doctest.h>

#include <cmath>
#include <sstream>

#include "comboplat/errors.hpp"
#include "comboplat/estimation.hpp"
#include "oracles.hpp"

using namespace comboplat;

namespace {

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

PairedEndpointTable parse(const std::string& text, CsvSchema schema = {}) {
  std::istringstream in(text);
  return parse_endpoint_csv(in, schema);
}

const std::string kData = std::string(COMBOPLAT_TEST_DATA);

}  // namespace

TEST_SUITE("estimation") {
  TEST_CASE("constructed fixture gives s_hat = 2") {
    const auto table = ingest_csv(kData + "/synthetic.csv");
    CHECK(table.rows_read == 18);
    const auto est = estimate_trial(table, "drugA", "drugB", "drugA+drugB");
    CHECK(est.s_hat == doctest::Approx(2.0).epsilon(1e-12));
    const double sd = std::sqrt(3.5);  // sample sd of 1..6
    CHECK(est.delta_B == doctest::Approx(1.0 / sd).epsilon(1e-12));
    CHECK(est.delta_AB == doctest::Approx(2.0 / sd).epsilon(1e-12));
    CHECK(est.rho_AB_A == doctest::Approx(pearson({3, 5, 4, 7, 6, 8}, {1, 2, 3, 4, 5, 6})).epsilon(1e-12));
    CHECK(est.rho_AB_B == doctest::Approx(pearson({3, 5, 4, 7, 6, 8}, {3, 2, 5, 4, 7, 6})).epsilon(1e-12));
    CHECK(est.n_A == 6);
    CHECK_FALSE(est.screened_out);
  }

  TEST_CASE("reversed roles are screened out, not dropped") {
    const auto table = ingest_csv(kData + "/synthetic.csv");
    const auto est = estimate_trial(table, "drugB", "drugA", "drugA+drugB");
    CHECK(est.screened_out);
    CHECK(est.delta_B < 0.0);
    const auto roles = read_roles(kData + "/roles.csv");
    REQUIRE(roles.size() == 2);
    CHECK(roles[1].drug_A == "drugB");
  }

  TEST_CASE("json keys follow the estimate fields") {
    const auto table = ingest_csv(kData + "/synthetic.csv");
    const auto j = to_json(estimate_trial(table, "drugA", "drugB", "drugA+drugB"));
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys == std::vector<std::string>{"rho_AB_A", "rho_AB_B", "delta_B", "delta_AB", "s_hat", "n_A", "n_B", "n_AB",
                                           "drug_A", "drug_B", "combo", "screened_out"});
    TrialEstimates nan_est;
    nan_est.s_hat = std::nan("");
    CHECK(to_json(nan_est)["s_hat"].is_null());
  }

  TEST_CASE("schema errors name the column") {
    try {
      ingest_csv(kData + "/missing_response.csv");
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      CHECK(e.column() == "response");
      CHECK(std::string(e.what()).find("response") != std::string::npos);
    }
    CsvSchema s;
    s.response_column = "value";
    CHECK(ingest_csv(kData + "/missing_response.csv", s).rows_read == 1);
  }

  TEST_CASE("parse errors carry the line") {
    try {
      parse("model_id,treatment,response\nM1,a,1\nM2,a\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 3);
    }
    try {
      parse("model_id,treatment,response\nM1,a,abc\n");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
  }

  TEST_CASE("duplicates: error or mean") {
    const std::string text = "model_id,treatment,response\nM1,a,1\nM1,a,3\nM2,a,2\n";
    CHECK_THROWS_AS(parse(text), ParseError);
    CsvSchema s;
    s.duplicates = DuplicatePolicy::Mean;
    const auto t = parse(text, s);
    CHECK(t.responses.at("M1").at("a") == doctest::Approx(2.0));
    CHECK(t.duplicates_merged == 1);
  }

  TEST_CASE("quotes, BOM, delimiter, sign flip") {
    const std::string text = "\xEF\xBB\xBFmodel_id;treatment;response\n\"M;1\";\"x \"\"y\"\"\";-1.5\n";
    CsvSchema s;
    s.delimiter = ';';
    s.flip_sign = true;
    const auto t = parse(text, s);
    CHECK(t.responses.at("M;1").at("x \"y\"") == doctest::Approx(1.5));
  }

  TEST_CASE("too few complete triples and constant arms") {
    CHECK_THROWS_AS(estimate_trial(parse("model_id,treatment,response\nM1,a,1\nM1,b,2\nM1,c,3\n"), "a", "b", "c"),
                    InsufficientData);
    const std::string flat = "model_id,treatment,response\nM1,a,1\nM1,b,2\nM1,c,3\nM2,a,1\nM2,b,3\nM2,c,4\nM3,a,1\nM3,b,1\nM3,c,0\n";
    CHECK_THROWS_AS(estimate_trial(parse(flat), "a", "b", "c"), ZeroVariance);
  }

  TEST_CASE("pooled sd") {
    CHECK(pooled_sd(2.0, 10, 2.0, 30) == doctest::Approx(2.0));
    CHECK(pooled_sd(1.0, 5, 3.0, 5) == doctest::Approx(std::sqrt(5.0)));
  }

  TEST_CASE("threshold summary at rho = 0.461") {
    const auto r = table1_from_rho(0.461, 100000, 1);
    CHECK(std::abs(r.fwer.p_threshold - 0.027) < 0.002);
    CHECK(std::abs(r.fmer.p_threshold - 0.022) < 0.002);
    CHECK(std::abs(r.msfp.p_threshold - 0.013) < 0.002);
    const double c = 1.959963984540054;
    CHECK(std::abs(r.unadjusted.fwer - oracle::fwer2(c, 0.461)) < 4.0 * r.unadjusted.std_error(oracle::fwer2(c, 0.461)));
    CHECK(std::abs(r.unadjusted.msfp - oracle::msfp2(c, 0.461)) < 4.0 * r.unadjusted.std_error(oracle::msfp2(c, 0.461)));
  }
}
