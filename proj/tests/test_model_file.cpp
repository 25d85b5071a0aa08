#include <gtest/gtest.h>

#include <fstream>

#include "mris/model_file.hpp"
#include "mris/mris.hpp"
#include "mris/output.hpp"

using namespace mris;

namespace {

const std::string kModels = MRIS_MODELS_DIR;

json load_json(const std::string& path) {
  std::ifstream in(path);
  return json::parse(in);
}

void expect_same_config(const ModelConfig& a, const ModelConfig& b) {
  EXPECT_EQ(a.chain.labels(), b.chain.labels());
  EXPECT_LE((a.chain.P() - b.chain.P()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((a.chain.pi() - b.chain.pi()).cwiseAbs().maxCoeff(), 1e-16);
  EXPECT_LE((a.h_sys.matrix() - b.h_sys.matrix()).cwiseAbs().maxCoeff(), 0.0);
  ASSERT_EQ(a.probes.size(), b.probes.size());
  for (std::size_t w = 0; w < a.probes.size(); ++w) {
    EXPECT_EQ(a.probes[w].beta, b.probes[w].beta);
    EXPECT_EQ(a.probes[w].tau, b.probes[w].tau);
    EXPECT_LE((a.probes[w].coupling.matrix() - b.probes[w].coupling.matrix()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((a.probes[w].h_env.matrix() - b.probes[w].h_env.matrix()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_LE((a.rho_init[w].matrix() - b.rho_init[w].matrix()).cwiseAbs().maxCoeff(), 0.0);
  }
  EXPECT_EQ(a.tri.has_value(), b.tri.has_value());
}

std::string schema_error(json j) {
  try {
    parse_model(j);
  } catch (const SchemaError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ModelFile, FixturesMatchCode) {
  expect_same_config(load_model_file(kModels + "/two_temperature_qubit.json").config, fixtures::two_temperature_config());
  expect_same_config(load_model_file(kModels + "/equilibrium_qubit.json").config, fixtures::equilibrium_config());
  expect_same_config(load_model_file(kModels + "/tri_broken_qubit.json").config, fixtures::tri_broken_config());
  const auto f = load_model_file(kModels + "/two_temperature_qubit.json");
  ASSERT_TRUE(f.adiabatic.has_value());
  EXPECT_EQ(f.adiabatic->form, "linear");
}

TEST(ModelFile, RoundTrip) {
  const auto cfg = fixtures::tri_broken_config();
  expect_same_config(parse_model(model_to_json(cfg)).config, cfg);
}

TEST(ModelFile, BadRowNamesThePointer) {
  json j = load_json(kModels + "/equilibrium_qubit.json");
  j["chain"]["P"][0] = {0.6, 0.3};
  const std::string msg = schema_error(j);
  EXPECT_NE(msg.find("/chain/P/0"), std::string::npos) << msg;
  EXPECT_NE(msg.find("0.9"), std::string::npos) << msg;
}

TEST(ModelFile, NonHermitianCouplingRejected) {
  json j = load_json(kModels + "/equilibrium_qubit.json");
  j["probes"]["r1"]["V"][0][1] = {0.3, 0.0};
  EXPECT_NE(schema_error(j).find("/probes/r1/V"), std::string::npos);
}

TEST(ModelFile, OtherSchemaErrors) {
  const json base = load_json(kModels + "/equilibrium_qubit.json");
  json j = base;
  j.erase("system");
  EXPECT_NE(schema_error(j).find("/system"), std::string::npos);
  j = base;
  j["schema_version"] = 2;
  EXPECT_NE(schema_error(j).find("/schema_version"), std::string::npos);
  j = base;
  j["probes"]["r2"]["beta"] = -1.0;
  EXPECT_NE(schema_error(j).find("/probes/r2/beta"), std::string::npos);
  j = base;
  j["tolerances"] = {{"tol_bogus", 1.0}};
  EXPECT_NE(schema_error(j).find("/tolerances/tol_bogus"), std::string::npos);
  j = base;
  j["initial_states"]["r1"][0][0] = {0.9, 0.0};
  EXPECT_NE(schema_error(j).find("/initial_states/r1"), std::string::npos);
  j = base;
  j["system"]["H_S"][1][1] = "x";
  EXPECT_NE(schema_error(j).find("/system/H_S/1/1"), std::string::npos);
}

TEST(ModelFile, ToleranceOverridesApply) {
  json j = load_json(kModels + "/equilibrium_qubit.json");
  j["tolerances"] = {{"degeneracy_tol", 1e-6}};
  EXPECT_EQ(parse_model(j).config.tol.degeneracy, 1e-6);
}

TEST(Output, FormatAndCsv) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(format_double(std::numeric_limits<double>::infinity()), "inf");
  CsvWriter csv({"a", "b"});
  csv.row(std::vector<double>{1.0, -2.5});
  EXPECT_EQ(csv.str(), "a,b\n1,-2.5\n");
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Output, ReportExitLogic) {
  RunReport r("x", "d", 1);
  r.add({"info", false, 0, 0, false});
  EXPECT_TRUE(r.all_pass());
  r.add({"req", false, 0, 0, true});
  EXPECT_FALSE(r.all_pass());
  EXPECT_EQ(r.to_json()["verdicts"].size(), 2u);
}
