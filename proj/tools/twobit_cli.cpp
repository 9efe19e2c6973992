// Command-line front end: run simulations and print the privacy and
// communication figures of the two-bit mechanism.

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "twobit/errors.hpp"
#include "twobit/harness.hpp"
#include "twobit/privacy.hpp"
#include "twobit/protocol.hpp"

namespace {

std::string rational_str(const twobit::Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-bit federated aggregation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_path;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  auto* simulate = app.add_subcommand("simulate", "Run a federated simulation and write per-round metrics");
  simulate->add_option("--config", config_path, "Key/value config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out_path, "Metrics output path (stdout when omitted)");
  simulate->add_option("--seed", seed, "Override the config seed");
  simulate->add_option("--threads", threads, "Override the node-parallel thread count");
  simulate->add_option("--format", format, "csv or kv")->check(CLI::IsMember({"csv", "kv"}));

  int p = 0;
  auto* epsilon = app.add_subcommand("epsilon", "Print the privacy budget ln(p/(p-2))");
  epsilon->add_option("--p", p, "Bit width of the representation")->required();

  auto* verify = app.add_subcommand("verify-dp", "Enumerate the privacy proof model and check the ratio bound");
  verify->add_option("--p", p, "Bit width, 4..16")->required();

  std::size_t params = 0;
  std::string method = "twobit";
  auto* overhead = app.add_subcommand("overhead", "Uplink bits per node per round");
  overhead->add_option("--p", p, "Bit width")->required();
  overhead->add_option("--params", params, "Model parameter count")->required();
  overhead->add_option("--method", method, "twobit, fedavg or dp_fedavg");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      twobit::SimulationConfig cfg = twobit::load_config(config_path);
      if (seed) cfg.seed = *seed;
      if (threads) cfg.threads = *threads;
      const auto metrics = twobit::run_simulation(cfg);
      const auto fmt = format == "kv" ? twobit::MetricsFormat::kKeyValue : twobit::MetricsFormat::kCsv;
      if (out_path.empty()) {
        twobit::write_metrics(std::cout, metrics, fmt);
      } else {
        twobit::emit_metrics(metrics, out_path, fmt);
      }
    } else if (*epsilon) {
      const auto report = twobit::privacy_report(p);
      std::cout << std::setprecision(17) << "p=" << p << " epsilon=" << report.epsilon
                << " delta=" << report.delta << '\n';
    } else if (*verify) {
      const auto result = twobit::proof_model_check(p);
      const twobit::Rational bound(p, p - 2);
      const bool ok = result.max_ratio == bound;
      std::cout << "p=" << p << " max_ratio=" << rational_str(result.max_ratio)
                << " bound=" << rational_str(bound)
                << " pr_x_zero=" << rational_str(result.x_outputs_zero[1])
                << " pr_xbar_zero=" << rational_str(result.x_bar_outputs_zero[1]) << ' '
                << (ok ? "PASS" : "FAIL") << '\n';
      return ok ? 0 : 1;
    } else if (*overhead) {
      const auto r = twobit::uplink_overhead(twobit::parse_method(method), p, params);
      std::cout << "method=" << twobit::to_string(r.method) << " p=" << p << " params=" << params
                << " uplink_bits=" << r.uplink_bits_per_node_per_round
                << " baseline_bits=" << r.baseline_bits << " framed_bits=" << r.framed_bits
                << " downlink_bits=" << r.downlink_bits
                << " reduction_factor=" << rational_str(r.reduction_factor) << '\n';
    }
  } catch (const twobit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
