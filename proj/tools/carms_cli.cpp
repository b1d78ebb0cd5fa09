// Copyright 2026 The carms Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// carms: toy variance study, pair correlation matrices and self checks.
//
// Exit codes: 0 success, 1 check failure or runtime error, 2 usage error.

#include "carms/selfcheck.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::optional<double> parse_clip(const std::string& text) {
  if (text == "none") return std::nullopt;
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    throw UsageError("--clip must be a positive number or 'none'");
  }
  if (used != text.size() || !(value > 0.0)) throw UsageError("--clip must be a positive number or 'none'");
  return value;
}

std::size_t parse_orderings(const std::string& text) {
  if (text == "all") return carms::kAllOrderings;
  if (text == "auto") return carms::kAutoOrderings;
  try {
    std::size_t used = 0;
    const unsigned long long value = std::stoull(text, &used);
    if (used == text.size() && value > 0) return static_cast<std::size_t>(value);
  } catch (const std::exception&) {
  }
  throw UsageError("--orderings must be 'all', 'auto' or a positive integer");
}

carms::CopulaKind parse_copula(const std::string& name, std::optional<double> rho) {
  if (name == "dirichlet") {
    if (rho) throw UsageError("--rho only applies to the gaussian copula");
    return carms::CopulaKind::dirichlet();
  }
  return carms::CopulaKind::gaussian(rho);
}

carms::OutputFormat parse_output(const std::string& name) {
  return name == "jsonl" ? carms::OutputFormat::kJsonLines : carms::OutputFormat::kCsv;
}

/// stdout unless --out-path is given.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
      if (!*file_) throw std::runtime_error("cannot open output file: " + path);
    }
  }
  std::ostream& stream() { return file_ ? static_cast<std::ostream&>(*file_) : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct CommonFlags {
  std::string copula = "dirichlet";
  std::optional<double> rho;
  std::size_t categories = 3;
  std::size_t samples = 3;
  std::uint64_t seed = 0;
  std::string clip = "10";
  std::string orderings = "auto";
  std::string output = "csv";
  std::string out_path;
};

void add_common(CLI::App& cmd, CommonFlags& flags) {
  cmd.add_option("--copula", flags.copula, "Copula family")
      ->check(CLI::IsMember({"dirichlet", "gaussian"}))
      ->capture_default_str();
  cmd.add_option("--rho", flags.rho, "Gaussian equicorrelation (default -1/(N-1))");
  cmd.add_option("--categories", flags.categories, "Number of categories C")->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  cmd.add_option("--samples", flags.samples, "Antithetic samples N")->check(CLI::Range(2, 1 << 20))
      ->capture_default_str();
  cmd.add_option("--seed", flags.seed, "Master seed")->capture_default_str();
  cmd.add_option("--clip", flags.clip, "Ratio ceiling, or 'none'")->capture_default_str();
  cmd.add_option("--orderings", flags.orderings, "Ordering budget: auto, all or a count")->capture_default_str();
  cmd.add_option("--output", flags.output, "Output format")
      ->check(CLI::IsMember({"csv", "jsonl"}))
      ->capture_default_str();
  cmd.add_option("--out-path", flags.out_path, "Output file (default stdout)");
}

int run_toy_command(const CommonFlags& flags, const std::vector<std::string>& methods, std::size_t dims,
                    const std::vector<double>& alphas, std::size_t trials, std::size_t inner, bool timing) {
  carms::ExperimentConfig config;
  config.methods.clear();
  for (const auto& m : methods) config.methods.push_back(carms::parse_method(m));
  config.copula = parse_copula(flags.copula, flags.rho);
  config.categories = flags.categories;
  config.dims = dims;
  config.samples = flags.samples;
  config.alphas = alphas;
  config.trials = trials;
  config.inner = inner;
  config.seed = flags.seed;
  config.clip = parse_clip(flags.clip);
  config.ordering_budget = parse_orderings(flags.orderings);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  Output out(flags.out_path);
  const auto format = parse_output(flags.output);
  if (format == carms::OutputFormat::kCsv) out.stream() << carms::toy_csv_header(config.dims, config.categories) << '\n';
  const auto start = std::chrono::steady_clock::now();
  std::size_t records = 0;
  carms::run_toy(config, [&](const carms::ResultRecord& r) {
    if (format == carms::OutputFormat::kCsv) {
      out.stream() << carms::toy_csv_row(r) << '\n';
    } else {
      out.stream() << carms::toy_json(r).dump() << '\n';
    }
    ++records;
    if (timing) {
      std::cerr << fmt::format("toy: method={} alpha={} trial={} seconds={:.6f}\n", r.method, r.alpha, r.trial,
                               r.seconds);
    }
  });
  out.stream().flush();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cerr << fmt::format("toy: {} records in {:.2f} s\n", records, seconds);
  return kExitOk;
}

int run_correlation_command(const CommonFlags& flags, const std::string& method, std::size_t draws) {
  carms::CorrelationConfig config;
  config.method = carms::parse_method(method);
  config.copula = parse_copula(flags.copula, flags.rho);
  config.categories = flags.categories;
  config.samples = flags.samples;
  config.draws = draws;
  config.seed = flags.seed;
  config.clip = parse_clip(flags.clip);
  config.ordering_budget = parse_orderings(flags.orderings);
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto record = carms::run_correlation(config);
  Output out(flags.out_path);
  if (parse_output(flags.output) == carms::OutputFormat::kCsv) {
    carms::write_correlation_csv(out.stream(), record);
  } else {
    out.stream() << carms::correlation_json(record).dump() << '\n';
  }
  out.stream().flush();
  return kExitOk;
}

int run_selfcheck_command(const std::string& level, std::uint64_t seed, bool inject_fault, const std::string& out_path) {
  carms::SelfcheckOptions options;
  options.level = level == "full" ? carms::SelfcheckLevel::kFull : carms::SelfcheckLevel::kFast;
  options.seed = seed;
  options.corrupt_ratio = inject_fault;
  const auto report = carms::run_selfcheck(options);
  Output out(out_path);
  out.stream() << report.text();
  out.stream().flush();
  return report.passed() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Antithetic categorical gradient estimators: experiments and self checks"};
  app.require_subcommand(1);

  CommonFlags toy_flags;
  std::vector<std::string> toy_methods{"carms-i", "carms-g", "loorf"};
  std::size_t toy_dims = 3;
  std::vector<double> toy_alphas{1.0, 10.0, 100.0, 1000.0};
  std::size_t toy_trials = 100;
  std::size_t toy_inner = 10'000;
  bool toy_timing = false;
  auto* toy = app.add_subcommand("toy", "Per-coordinate gradient variance on the toy objective");
  add_common(*toy, toy_flags);
  toy->add_option("--method", toy_methods, "Methods to compare")
      ->delimiter(',')
      ->check(CLI::IsMember({"carms-i", "carms-g", "loorf", "reinforce"}))
      ->capture_default_str();
  toy->add_option("--dims", toy_dims, "Number of categorical variables D")->check(CLI::Range(1, 1 << 20))
      ->capture_default_str();
  toy->add_option("--alpha", toy_alphas, "Dirichlet concentrations")->delimiter(',')->capture_default_str();
  toy->add_option("--trials", toy_trials, "Probability draws per alpha")->check(CLI::Range(1, 1 << 30))
      ->capture_default_str();
  toy->add_option("--inner", toy_inner, "Gradient draws per trial")->check(CLI::Range(2, 1 << 30))
      ->capture_default_str();
  toy->add_flag("--timing", toy_timing, "Print per-record wall-clock to stderr");

  CommonFlags corr_flags;
  corr_flags.samples = 2;
  std::string corr_method = "carms-i";
  std::size_t corr_draws = 1000;
  auto* corr = app.add_subcommand("correlation", "Cross-correlation matrix of an antithetic pair");
  add_common(*corr, corr_flags);
  corr->add_option("--method", corr_method, "Sampler: carms-i, carms-g, or loorf/reinforce (independent)")
      ->check(CLI::IsMember({"carms-i", "carms-g", "loorf", "reinforce"}))
      ->capture_default_str();
  corr->add_option("--trials,--draws", corr_draws, "Number of antithetic draws")->check(CLI::Range(100, 1 << 30))
      ->capture_default_str();

  std::string check_level = "fast";
  std::uint64_t check_seed = 0;
  bool inject_fault = false;
  std::string check_out;
  auto* check = app.add_subcommand("selfcheck", "Run the oracle-backed invariant checks");
  check->add_option("--level", check_level, "fast or full")->check(CLI::IsMember({"fast", "full"}))
      ->capture_default_str();
  check->add_option("--seed", check_seed, "Seed for the fuzzed instances")->capture_default_str();
  check->add_option("--out-path", check_out, "Report file (default stdout)");
  check->add_flag("--inject-fault", inject_fault, "Negate one importance ratio (demonstrates failure detection)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*toy) return run_toy_command(toy_flags, toy_methods, toy_dims, toy_alphas, toy_trials, toy_inner, toy_timing);
    if (*corr) return run_correlation_command(corr_flags, corr_method, corr_draws);
    if (*check) return run_selfcheck_command(check_level, check_seed, inject_fault, check_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
