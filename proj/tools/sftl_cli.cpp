// Command-line front end. Links only the public C API; the bench
// subcommand orchestrates two loopback child processes of this binary.

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sftl/sftl.h"

namespace {

struct Opts {
  std::string role, engine = "sh", peer, preproc = "preproc", data, label_col = "label";
  std::string features_s, features_t, metrics_out, weights_out, weights_in, peer_weights;
  std::string cheat = "none", out;
  int listen = 0;
  double eta = 0.05, gamma = 0.05, lambda = 0.005, eps = 1e-3, overlap = 0.2, noise = 0.0;
  unsigned max_iter = 50, d = 32, frac_bits = 16, n_labeled = 0, samples = 16,
           predict_samples = 0, cheat_target = 0, gen_fs = 4, gen_ft = 4;
  unsigned long long seed = 1;
};

int status_to_exit(sftl_status s) {
  switch (s) {
    case SFTL_OK: return 0;
    case SFTL_ERR_ABORT: return 3;
    case SFTL_ERR_MISMATCH: return 4;
    case SFTL_ERR_TRANSPORT: return 5;
    default: return 1;
  }
}

struct Config {
  sftl_config* c;
  Config() : c(sftl_config_new()) {}
  ~Config() { sftl_config_free(c); }
  void set(const std::string& k, const std::string& v) {
    if (sftl_config_set(c, k.c_str(), v.c_str()) != SFTL_OK) {
      std::cerr << "internal: bad config key " << k << "\n";
      std::exit(1);
    }
  }
  template <typename T>
  void setn(const std::string& k, T v) {
    std::ostringstream os;
    os << v;
    set(k, os.str());
  }
};

void fill_common(Config& cfg, const Opts& o) {
  cfg.set("engine", o.engine);
  cfg.setn("eta", o.eta);
  cfg.setn("gamma", o.gamma);
  cfg.setn("lambda", o.lambda);
  cfg.setn("eps", o.eps);
  cfg.setn("max_iter", o.max_iter);
  cfg.setn("d", o.d);
  cfg.setn("frac_bits", o.frac_bits);
  cfg.setn("seed", o.seed);
  cfg.setn("overlap_frac", o.overlap);
  cfg.setn("n_labeled", o.n_labeled);
  cfg.set("label_column", o.label_col);
  if (!o.features_s.empty()) cfg.set("features_s", o.features_s);
  if (!o.features_t.empty()) cfg.set("features_t", o.features_t);
  if (!o.data.empty()) cfg.set("data", o.data);
  cfg.set("preproc", o.preproc);
}

void fill_endpoint(Config& cfg, const Opts& o) {
  if (!o.peer.empty()) {
    auto colon = o.peer.rfind(':');
    if (colon == std::string::npos) {
      std::cerr << "--peer expects host:port\n";
      std::exit(1);
    }
    cfg.set("peer_host", o.peer.substr(0, colon));
    cfg.set("peer_port", o.peer.substr(colon + 1));
  } else if (o.listen > 0) {
    cfg.setn("listen_port", o.listen);
  } else {
    std::cerr << "one of --peer or --listen is required\n";
    std::exit(1);
  }
}

int cmd_gen(const Opts& o) {
  Config cfg;
  cfg.set("out", o.out);
  cfg.setn("gen_samples", o.samples);
  cfg.setn("gen_features_s", o.gen_fs);
  cfg.setn("gen_features_t", o.gen_ft);
  cfg.setn("noise", o.noise);
  cfg.setn("seed", o.seed);
  char err[256];
  sftl_status s = sftl_generate(cfg.c, err, sizeof(err));
  if (s != SFTL_OK) std::cerr << "gen failed: " << err << "\n";
  else std::cout << "wrote " << o.out << " (" << o.samples << " samples)\n";
  return status_to_exit(s);
}

int cmd_deal(const Opts& o) {
  Config cfg;
  fill_common(cfg, o);
  cfg.setn("predict_samples", o.predict_samples);
  char err[256];
  sftl_status s = sftl_deal(cfg.c, err, sizeof(err));
  if (s != SFTL_OK) {
    std::cerr << "deal failed: " << err << "\n";
  } else {
    std::cout << "wrote " << o.preproc << ".s and " << o.preproc << ".t\n";
  }
  return status_to_exit(s);
}

int cmd_train(const Opts& o) {
  Config cfg;
  fill_common(cfg, o);
  fill_endpoint(cfg, o);
  cfg.set("role", o.role);
  cfg.set("cheat", o.cheat);
  cfg.setn("cheat_target", o.cheat_target);
  if (!o.metrics_out.empty()) cfg.set("metrics_out", o.metrics_out);
  if (!o.weights_out.empty()) cfg.set("weights_out", o.weights_out);
  char err[256];
  sftl_result* r = nullptr;
  sftl_status s = sftl_train(cfg.c, &r, err, sizeof(err));
  if (s != SFTL_OK) {
    std::cerr << "train failed (" << sftl_status_name(s) << "): " << err << "\n";
    return status_to_exit(s);
  }
  std::cout << "party " << o.role << ": " << sftl_result_iterations(r) << " iterations, "
            << (sftl_result_converged(r) ? "converged" : "max-iter") << ", sent "
            << sftl_result_bytes_sent(r) << " bytes in " << sftl_result_rounds(r)
            << " rounds, " << sftl_result_triples_used(r) << " triples\n";
  sftl_result_free(r);
  return 0;
}

int cmd_predict(const Opts& o) {
  Config cfg;
  fill_common(cfg, o);
  fill_endpoint(cfg, o);
  cfg.set("role", o.role);
  cfg.setn("samples", o.samples);
  cfg.set("weights_in", o.weights_in);
  if (!o.peer_weights.empty()) cfg.set("peer_weights", o.peer_weights);
  char err[256];
  sftl_result* r = nullptr;
  sftl_status s = sftl_predict(cfg.c, &r, err, sizeof(err));
  if (s != SFTL_OK) {
    std::cerr << "predict failed (" << sftl_status_name(s) << "): " << err << "\n";
    return status_to_exit(s);
  }
  std::cout << "labels:";
  for (size_t i = 0; i < sftl_result_label_count(r); ++i)
    std::cout << ' ' << (sftl_result_label(r, i) > 0 ? "+1" : "-1");
  std::cout << "\n";
  double agree = sftl_result_agreement(r);
  if (agree >= 0) std::cout << "cleartext agreement: " << agree * 100.0 << "%\n";
  sftl_result_free(r);
  return 0;
}

// --- bench: loopback sweeps over two child processes ---

struct IterRow {
  double init_ms = 0, compute_ms = 0, reveal_ms = 0;
  unsigned long long bytes = 0, rounds = 0, triples = 0;
};

std::vector<IterRow> read_metrics(const std::string& path) {
  std::ifstream f(path);
  std::vector<IterRow> rows;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    IterRow r;
    unsigned iter;
    unsigned long long brecv, masks, packs, truncs;
    if (std::sscanf(line.c_str(), "%u,%lf,%lf,%lf,%llu,%llu,%llu,%llu,%llu,%llu,%llu", &iter,
                    &r.init_ms, &r.compute_ms, &r.reveal_ms, &r.bytes, &brecv, &r.rounds,
                    &r.triples, &masks, &packs, &truncs) == 11)
      rows.push_back(r);
  }
  return rows;
}

std::string self_exe() {
  char buf[4096];
  ssize_t n = readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return "sftl";
  buf[n] = '\0';
  return buf;
}

int run_child(const std::vector<std::string>& args) {
  pid_t pid = fork();
  if (pid == 0) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    execv(argv[0], argv.data());
    _exit(127);
  }
  return pid;
}

struct BenchPoint {
  unsigned value;
  double iter_ms, init_ms, compute_ms, reveal_ms;
  double bytes, rounds, triples;
};

// least-squares fit y = a + b x, returns R^2
double linear_r2(const std::vector<double>& xs, const std::vector<double>& ys) {
  size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  double b = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  double a = (sy - b * sx) / n;
  double ss_res = 0, ss_tot = 0, mean = sy / n;
  for (size_t i = 0; i < n; ++i) {
    double fit = a + b * xs[i];
    ss_res += (ys[i] - fit) * (ys[i] - fit);
    ss_tot += (ys[i] - mean) * (ys[i] - mean);
  }
  return ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
}

int cmd_bench(const Opts& o, const std::string& axis, const std::string& values_csv,
              const std::string& out_csv, const std::string& workdir) {
  std::vector<unsigned> values;
  {
    std::stringstream ss(values_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) values.push_back(unsigned(std::stoul(tok)));
  }
  if (values.empty()) {
    std::cerr << "--values required\n";
    return 1;
  }
  std::string exe = self_exe();
  std::vector<BenchPoint> points;
  unsigned short port = 19751;

  for (unsigned v : values) {
    unsigned samples = axis == "samples" ? v : 100;
    unsigned d = axis == "d" ? v : o.d;
    unsigned ft = axis == "features" ? v : o.gen_ft;
    double overlap = axis == "overlap" ? double(v) / double(samples) : o.overlap;
    unsigned n_labeled = std::max(2u, samples * 2 / 5);

    std::string base = workdir + "/bench_" + axis + "_" + std::to_string(v);
    std::string csv = base + ".csv", pre = base + ".pre";
    std::string m0 = base + ".s.metrics", m1 = base + ".t.metrics";

    Config gen;
    gen.set("out", csv);
    gen.setn("gen_samples", samples);
    gen.setn("gen_features_s", o.gen_fs);
    gen.setn("gen_features_t", ft);
    gen.setn("seed", o.seed);
    char err[256];
    if (sftl_generate(gen.c, err, sizeof(err)) != SFTL_OK) {
      std::cerr << "bench: gen failed: " << err << "\n";
      return 1;
    }

    Config deal;
    deal.set("engine", o.engine);
    deal.set("data", csv);
    deal.set("preproc", pre);
    deal.setn("overlap_frac", overlap);
    deal.setn("n_labeled", n_labeled);
    deal.setn("d", d);
    deal.setn("max_iter", o.max_iter);
    deal.setn("seed", o.seed);
    deal.setn("frac_bits", o.frac_bits);
    deal.setn("eps", 0.0);  // never converge early; measure every iteration
    if (sftl_deal(deal.c, err, sizeof(err)) != SFTL_OK) {
      std::cerr << "bench: deal failed: " << err << "\n";
      return 1;
    }

    ++port;
    auto party_args = [&](const char* role, const std::string& metrics,
                          bool listener) {
      std::vector<std::string> a{exe, "train", "--role", role, "--engine", o.engine,
                                 "--data", csv, "--preproc", pre,
                                 "--overlap-frac", std::to_string(overlap),
                                 "--n-labeled", std::to_string(n_labeled),
                                 "--d", std::to_string(d),
                                 "--max-iter", std::to_string(o.max_iter),
                                 "--eps", "0",
                                 "--seed", std::to_string(o.seed),
                                 "--frac-bits", std::to_string(o.frac_bits),
                                 "--metrics-out", metrics};
      if (listener) {
        a.push_back("--listen");
        a.push_back(std::to_string(port));
      } else {
        a.push_back("--peer");
        a.push_back("127.0.0.1:" + std::to_string(port));
      }
      return a;
    };
    int p1 = run_child(party_args("T", m1, true));
    int p0 = run_child(party_args("S", m0, false));
    int st0 = 0, st1 = 0;
    waitpid(p0, &st0, 0);
    waitpid(p1, &st1, 0);
    if (st0 || st1) {
      std::cerr << "bench: training pair failed at " << axis << "=" << v << "\n";
      return 1;
    }

    auto rows = read_metrics(m0);
    if (rows.empty()) {
      std::cerr << "bench: no metrics at " << axis << "=" << v << "\n";
      return 1;
    }
    BenchPoint pt{};
    pt.value = v;
    for (const auto& r : rows) {
      pt.init_ms += r.init_ms;
      pt.compute_ms += r.compute_ms;
      pt.reveal_ms += r.reveal_ms;
      pt.bytes += double(r.bytes);
      pt.rounds += double(r.rounds);
      pt.triples += double(r.triples);
    }
    double n = double(rows.size());
    pt.init_ms /= n;
    pt.compute_ms /= n;
    pt.reveal_ms /= n;
    pt.bytes /= n;
    pt.rounds /= n;
    pt.triples /= n;
    pt.iter_ms = pt.init_ms + pt.compute_ms + pt.reveal_ms;
    points.push_back(pt);
    std::cout << axis << "=" << v << ": " << pt.iter_ms << " ms/iter, " << pt.bytes
              << " bytes/iter, " << pt.triples << " triples/iter\n";
  }

  std::ofstream out(out_csv, std::ios::trunc);
  out << "axis,value,engine,init_ms,compute_ms,reveal_ms,iter_ms,bytes_per_iter,"
         "rounds_per_iter,triples_per_iter,offline_bits,offline_seconds\n";
  for (const auto& p : points) {
    double bits = 0, secs = 0;
    sftl_offline_cost(o.engine.c_str(), (unsigned long long)(p.triples), &bits, &secs);
    out << axis << ',' << p.value << ',' << o.engine << ',' << p.init_ms << ','
        << p.compute_ms << ',' << p.reveal_ms << ',' << p.iter_ms << ',' << p.bytes << ','
        << p.rounds << ',' << p.triples << ',' << bits << ',' << secs << "\n";
  }

  std::vector<double> xs, ts, bs;
  for (const auto& p : points) {
    xs.push_back(p.value);
    ts.push_back(p.iter_ms);
    bs.push_back(p.bytes);
  }
  if (points.size() >= 3) {
    std::cout << "linear fit R^2: time " << linear_r2(xs, ts) << ", bytes "
              << linear_r2(xs, bs) << "\n";
    std::vector<double> logx, logt;
    for (const auto& p : points) {
      logx.push_back(std::log(double(p.value)));
      logt.push_back(std::log(std::max(p.iter_ms, 1e-9)));
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    size_t n = logx.size();
    for (size_t i = 0; i < n; ++i) {
      sx += logx[i];
      sy += logt[i];
      sxx += logx[i] * logx[i];
      sxy += logx[i] * logt[i];
    }
    double expn = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    std::cout << "power-law exponent (time vs " << axis << "): " << expn << "\n";
  }
  std::cout << "wrote " << out_csv << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sftl: two-party secure federated transfer learning"};
  app.require_subcommand(1);
  Opts o;
  std::string axis = "samples", values = "10,20,50,100", bench_out = "bench.csv",
              workdir = ".";

  auto add_common = [&](CLI::App* c) {
    c->add_option("--engine", o.engine)->check(CLI::IsMember({"sh", "mal"}));
    c->add_option("--data", o.data);
    c->add_option("--preproc", o.preproc);
    c->add_option("--label-col", o.label_col);
    c->add_option("--features-s", o.features_s);
    c->add_option("--features-t", o.features_t);
    c->add_option("--overlap-frac", o.overlap);
    c->add_option("--n-labeled", o.n_labeled);
    c->add_option("--eta", o.eta);
    c->add_option("--gamma", o.gamma);
    c->add_option("--lambda", o.lambda);
    c->add_option("--eps", o.eps);
    c->add_option("--max-iter", o.max_iter);
    c->add_option("--d", o.d);
    c->add_option("--frac-bits", o.frac_bits);
    c->add_option("--seed", o.seed);
  };
  auto add_endpoint = [&](CLI::App* c) {
    c->add_option("--role", o.role)->check(CLI::IsMember({"S", "T"}))->required();
    c->add_option("--peer", o.peer, "host:port to connect to");
    c->add_option("--listen", o.listen, "port to accept on");
  };

  auto* gen = app.add_subcommand("gen", "generate a synthetic CSV dataset");
  gen->add_option("--out", o.out)->required();
  gen->add_option("--samples", o.samples);
  gen->add_option("--fs", o.gen_fs, "source-side feature count");
  gen->add_option("--ft", o.gen_ft, "target-side feature count");
  gen->add_option("--noise", o.noise);
  gen->add_option("--seed", o.seed);

  auto* deal = app.add_subcommand("deal", "run the trusted dealer");
  add_common(deal);
  deal->add_option("--predict-samples", o.predict_samples);

  auto* train = app.add_subcommand("train", "run one training party");
  add_common(train);
  add_endpoint(train);
  train->add_option("--cheat", o.cheat)->check(CLI::IsMember({"none", "share", "open", "output"}));
  train->add_option("--cheat-target", o.cheat_target);
  train->add_option("--metrics-out", o.metrics_out);
  train->add_option("--weights-out", o.weights_out);

  auto* predict = app.add_subcommand("predict", "run one prediction party");
  add_common(predict);
  add_endpoint(predict);
  predict->add_option("--samples", o.samples);
  predict->add_option("--weights-in", o.weights_in)->required();
  predict->add_option("--peer-weights", o.peer_weights);

  auto* bench = app.add_subcommand("bench", "loopback scaling sweeps");
  add_common(bench);
  bench->add_option("--axis", axis)->check(CLI::IsMember({"samples", "overlap", "features", "d"}));
  bench->add_option("--values", values, "comma-separated axis values");
  bench->add_option("--out", bench_out);
  bench->add_option("--workdir", workdir);
  bench->add_option("--fs", o.gen_fs);
  bench->add_option("--ft", o.gen_ft);

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) return cmd_gen(o);
  if (deal->parsed()) return cmd_deal(o);
  if (train->parsed()) return cmd_train(o);
  if (predict->parsed()) return cmd_predict(o);
  if (bench->parsed()) return cmd_bench(o, axis, values, bench_out, workdir);
  return 1;
}
