#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "mveb/verify.hpp"

using namespace mveb;

namespace {

const VerifyReport& default_report() {
  static const VerifyReport report = verify_suite();
  return report;
}

}  // namespace

TEST(VerifySuite, DefaultSuitePasses) {
  const VerifyReport& r = default_report();
  for (const auto& p : r.results)
    EXPECT_EQ(p.status, PropertyStatus::passed)
        << p.module << '/' << p.property << " observed=" << p.observed << ' ' << p.message;
  EXPECT_EQ(r.exit_code(), 0);
}

TEST(VerifySuite, CoversEveryModule) {
  std::set<std::string> modules;
  for (const auto& p : default_report().results) modules.insert(p.module);
  const std::set<std::string> expected{"info_oracle", "sphere_vmf", "kernels", "stein_score", "entropy_grad",
                                       "losses", "encoder", "synth_data", "harness_cli"};
  EXPECT_EQ(modules, expected);
  EXPECT_NE(default_report().find("entropy_grad", "stein_score_grad_m2048"), nullptr);
}

TEST(VerifySuite, FlippedScoreSignIsCaught) {
  VerifyOptions o;
  o.flip_score_sign = true;
  const VerifyReport r = verify_suite(o);
  const PropertyResult* p = r.find("entropy_grad", "stein_score_grad_m2048");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->status, PropertyStatus::failed);
  EXPECT_GT(p->observed, 1.0);
  EXPECT_EQ(r.exit_code(), 1);
}

TEST(VerifySuite, ZeroRidgeIsConfigError) {
  VerifyOptions o;
  o.ridge_eta = 0.0;
  const VerifyReport r = verify_suite(o);
  EXPECT_TRUE(r.has_config_error());
  EXPECT_EQ(r.exit_code(), 2);
  const PropertyResult* p = r.find("entropy_grad", "stein_score_grad_m2048");
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->status, PropertyStatus::config_error);
  EXPECT_NE(p->message.find("ridge"), std::string::npos);
}

TEST(SuiteRunner, ClassifiesOutcomes) {
  VerifyReport report;
  detail::SuiteRunner run(report);
  run.check("m", "pass", Comparison::less, 1.0, [] { return 0.5; });
  run.check("m", "boundary_strict", Comparison::less, 1.0, [] { return 1.0; });
  run.check("m", "boundary_inclusive", Comparison::less_equal, 1.0, [] { return 1.0; });
  run.check("m", "greater", Comparison::greater, 0.0, [] { return -1.0; });
  run.check("m", "config", Comparison::less, 1.0, []() -> double { throw ConfigError("bad knob"); });
  run.check("m", "error", Comparison::less, 1.0, []() -> double { throw NumericalError("overflow"); });
  ASSERT_EQ(report.results.size(), 6u);
  EXPECT_EQ(report.results[0].status, PropertyStatus::passed);
  EXPECT_EQ(report.results[1].status, PropertyStatus::failed);
  EXPECT_EQ(report.results[2].status, PropertyStatus::passed);
  EXPECT_EQ(report.results[3].status, PropertyStatus::failed);
  EXPECT_EQ(report.results[4].status, PropertyStatus::config_error);
  EXPECT_EQ(report.results[4].message, "bad knob");
  EXPECT_EQ(report.results[5].status, PropertyStatus::error);
  EXPECT_EQ(report.exit_code(), 2);
}

TEST(WriteReport, LineFormat) {
  VerifyReport report;
  PropertyResult ok;
  ok.module = "losses";
  ok.property = "x";
  ok.observed = 0.25;
  ok.bound = 0.5;
  ok.status = PropertyStatus::passed;
  PropertyResult cfg = ok;
  cfg.property = "y";
  cfg.status = PropertyStatus::config_error;
  cfg.message = "ridge_eta must be > 0";
  report.results = {ok, cfg};
  std::ostringstream os;
  write_report(os, report);
  EXPECT_EQ(os.str(),
            "PASS losses/x observed=0.25 bound<0.5 [0.00s]\n"
            "CONFIG-ERROR losses/y (ridge_eta must be > 0) [0.00s]\n"
            "1/2 properties passed\n");
}
