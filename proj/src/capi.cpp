#include "sftl/sftl.h"

#include <cstring>
#include <map>
#include <optional>
#include <string>

#include "data.hpp"
#include "model.hpp"
#include "net.hpp"
#include "preprocessing.hpp"
#include "protocol.hpp"
#include "sha256.hpp"
#include "sharing.hpp"

using namespace sftl;

struct sftl_config {
  std::map<std::string, std::string> kv;

  std::string get(const std::string& key, const std::string& dflt = "") const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : it->second;
  }
  bool has(const std::string& key) const { return kv.count(key) > 0; }
  double num(const std::string& key, double dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stod(it->second);
  }
  std::uint64_t uint(const std::string& key, std::uint64_t dflt) const {
    auto it = kv.find(key);
    return it == kv.end() ? dflt : std::stoull(it->second);
  }
};

struct sftl_result {
  std::uint32_t iterations = 0;
  bool converged = false;
  std::uint64_t bytes_sent = 0, bytes_received = 0, rounds = 0, triples = 0;
  std::vector<int> labels;
  double agreement = -1.0;
};

namespace {

const char* kVersion = "0.1.0";

void fill_err(char* err, size_t err_len, const std::string& what) {
  if (!err || err_len == 0) return;
  std::size_t n = std::min(err_len - 1, what.size());
  std::memcpy(err, what.data(), n);
  err[n] = '\0';
}

sftl_status classify(const std::exception& e) {
  if (dynamic_cast<const AbortError*>(&e)) return SFTL_ERR_ABORT;
  if (dynamic_cast<const MismatchError*>(&e)) return SFTL_ERR_MISMATCH;
  if (dynamic_cast<const TransportError*>(&e)) return SFTL_ERR_TRANSPORT;
  if (dynamic_cast<const PreprocExhausted*>(&e)) return SFTL_ERR_PREPROC;
  if (dynamic_cast<const DataError*>(&e)) return SFTL_ERR_DATA;
  if (dynamic_cast<const std::invalid_argument*>(&e)) return SFTL_ERR_ARGS;
  return SFTL_ERR_INTERNAL;
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

DatasetSpec dataset_spec(const sftl_config& cfg) {
  DatasetSpec spec;
  spec.csv_path = cfg.get("data");
  if (spec.csv_path.empty()) throw std::invalid_argument("data path required");
  spec.label_column = cfg.get("label_column", "label");
  spec.source_columns = split_names(cfg.get("features_s"));
  spec.target_columns = split_names(cfg.get("features_t"));
  spec.overlap_frac = cfg.num("overlap_frac", 0.2);
  spec.n_labeled = std::uint32_t(cfg.uint("n_labeled", 0));
  spec.seed = cfg.uint("seed", 1);
  return spec;
}

SessionParams session_params(const sftl_config& cfg) {
  SessionParams p;
  std::string engine = cfg.get("engine", "sh");
  if (engine == "sh") p.engine = EngineKind::SemiHonest;
  else if (engine == "mal") p.engine = EngineKind::Malicious;
  else throw std::invalid_argument("engine must be sh or mal");
  p.codec.frac_bits = int(cfg.uint("frac_bits", 16));
  if (!p.codec.valid()) throw std::invalid_argument("invalid frac_bits");
  p.hp.eta = cfg.num("eta", 0.05);
  p.hp.gamma = cfg.num("gamma", 0.05);
  p.hp.lambda = cfg.num("lambda", 0.005);
  p.hp.eps = cfg.num("eps", 1e-3);
  p.hp.max_iter = std::uint32_t(cfg.uint("max_iter", 50));
  p.d = std::uint32_t(cfg.uint("d", 32));
  p.seed = cfg.uint("seed", 1);
  std::string cheat = cfg.get("cheat", "none");
  if (cheat == "share") p.cheat.mode = CheatPlan::Mode::Share;
  else if (cheat == "open") p.cheat.mode = CheatPlan::Mode::Open;
  else if (cheat == "output") p.cheat.mode = CheatPlan::Mode::Output;
  else if (cheat != "none") throw std::invalid_argument("cheat must be none|share|open|output");
  p.cheat.target = cfg.uint("cheat_target", 0);
  return p;
}

PartyRole role_of(const sftl_config& cfg) {
  std::string r = cfg.get("role");
  if (r == "S" || r == "s") return PartyRole::Source;
  if (r == "T" || r == "t") return PartyRole::Target;
  throw std::invalid_argument("role must be S or T");
}

Channel open_channel(const sftl_config& cfg) {
  int timeout = int(cfg.uint("timeout_ms", 30000));
  if (cfg.has("peer_host"))
    return connect_channel(cfg.get("peer_host"),
                           std::uint16_t(cfg.uint("peer_port", 9000)), timeout);
  if (cfg.has("listen_port"))
    return accept_channel(std::uint16_t(cfg.uint("listen_port", 9000)), timeout);
  throw std::invalid_argument("one of peer_host or listen_port required");
}

std::string preproc_path(const sftl_config& cfg, PartyRole role) {
  std::string prefix = cfg.get("preproc", "preproc");
  return prefix + (role == PartyRole::Source ? ".s" : ".t");
}

std::array<std::uint8_t, 32> dealer_seed(std::uint64_t seed) {
  std::string tag = "sftl-deal";
  Sha256 h;
  h.update(tag.data(), tag.size());
  h.update(&seed, sizeof(seed));
  return h.finish();
}

}  // namespace

extern "C" {

const char* sftl_version(void) { return kVersion; }

const char* sftl_status_name(sftl_status s) {
  switch (s) {
    case SFTL_OK: return "ok";
    case SFTL_ERR_ARGS: return "bad-arguments";
    case SFTL_ERR_IO: return "io-error";
    case SFTL_ERR_DATA: return "data-error";
    case SFTL_ERR_TRANSPORT: return "transport-error";
    case SFTL_ERR_MISMATCH: return "parameter-mismatch";
    case SFTL_ERR_ABORT: return "abort";
    case SFTL_ERR_PREPROC: return "preprocessing-error";
    case SFTL_ERR_INTERNAL: return "internal-error";
  }
  return "unknown";
}

sftl_config* sftl_config_new(void) { return new sftl_config; }
void sftl_config_free(sftl_config* cfg) { delete cfg; }

sftl_status sftl_config_set(sftl_config* cfg, const char* key, const char* value) {
  static const char* known[] = {
      "role", "engine", "peer_host", "peer_port", "listen_port", "preproc", "data",
      "label_column", "features_s", "features_t", "overlap_frac", "n_labeled", "eta",
      "gamma", "lambda", "eps", "max_iter", "d", "frac_bits", "seed", "cheat",
      "cheat_target", "metrics_out", "weights_out", "weights_in", "samples",
      "peer_weights", "predict_samples", "out", "gen_samples", "gen_features_s",
      "gen_features_t", "noise", "timeout_ms"};
  if (!cfg || !key || !value) return SFTL_ERR_ARGS;
  for (const char* k : known) {
    if (std::strcmp(k, key) == 0) {
      cfg->kv[key] = value;
      return SFTL_OK;
    }
  }
  return SFTL_ERR_ARGS;
}

sftl_status sftl_deal(const sftl_config* cfg, char* err, size_t err_len) {
  try {
    auto split = load_and_split(dataset_spec(*cfg));
    SessionParams p = session_params(*cfg);
    TrainShape shape = split.shape;
    shape.hidden = p.d;
    shape.max_iter = p.hp.max_iter;
    shape.predict_samples = std::uint32_t(cfg->uint("predict_samples", 0));

    DealerConfig dc;
    dc.engine = p.engine;
    dc.frac_bits = p.codec.frac_bits;
    dc.counts = count_required_material(shape, p.engine);
    dc.seed = dealer_seed(p.seed);
    deal_to_files(dc, cfg->get("preproc", "preproc"));
    return SFTL_OK;
  } catch (const std::exception& e) {
    fill_err(err, err_len, e.what());
    return classify(e);
  }
}

sftl_status sftl_train(const sftl_config* cfg, sftl_result** out, char* err, size_t err_len) {
  try {
    PartyRole role = role_of(*cfg);
    auto split = load_and_split(dataset_spec(*cfg));
    SessionParams p = session_params(*cfg);
    PreprocStore store = load_preproc_file(preproc_path(*cfg, role));
    Channel ch = open_channel(*cfg);

    TrainResult tr = train_session(
        ch, role, p, std::move(store),
        role == PartyRole::Source ? &split.source : nullptr,
        role == PartyRole::Target ? &split.target : nullptr);

    if (cfg->has("metrics_out")) write_metrics_csv(cfg->get("metrics_out"), tr.metrics);
    if (cfg->has("weights_out")) save_weights(cfg->get("weights_out"), tr.net, p.codec);

    if (out) {
      auto* r = new sftl_result;
      r->iterations = tr.iterations;
      r->converged = tr.converged;
      r->bytes_sent = ch.stats().bytes_sent;
      r->bytes_received = ch.stats().bytes_received;
      r->rounds = ch.stats().rounds;
      for (const auto& m : tr.metrics) r->triples += m.triples;
      *out = r;
    }
    return SFTL_OK;
  } catch (const std::exception& e) {
    fill_err(err, err_len, e.what());
    return classify(e);
  }
}

sftl_status sftl_predict(const sftl_config* cfg, sftl_result** out, char* err, size_t err_len) {
  try {
    PartyRole role = role_of(*cfg);
    auto split = load_and_split(dataset_spec(*cfg));
    SessionParams p = session_params(*cfg);
    PreprocStore store = load_preproc_file(preproc_path(*cfg, role));
    if (!cfg->has("weights_in")) throw std::invalid_argument("weights_in required for predict");
    LocalNet net = load_weights(cfg->get("weights_in"), p.codec);

    Mat samples;
    if (role == PartyRole::Target) {
      std::size_t n = std::min<std::size_t>(cfg->uint("samples", 16), split.target.x.rows);
      if (n == 0) throw std::invalid_argument("no prediction samples");
      samples = Mat(n, split.target.x.cols);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < samples.cols; ++c)
          samples.at(i, c) = split.target.x.at(i, c);
    }

    Channel ch = open_channel(*cfg);
    auto labels = predict_session(ch, role, p, std::move(store), net,
                                  role == PartyRole::Source ? &split.source : nullptr,
                                  role == PartyRole::Target ? &split.target : nullptr,
                                  role == PartyRole::Target ? &samples : nullptr);

    auto* r = new sftl_result;
    r->labels = labels;
    r->bytes_sent = ch.stats().bytes_sent;
    r->bytes_received = ch.stats().bytes_received;
    r->rounds = ch.stats().rounds;

    // Optional local cleartext check: with both weight files on disk (the
    // loopback demo case) either party can recompute psi in the clear.
    if (cfg->has("peer_weights")) {
      LocalNet peer_net = load_weights(cfg->get("peer_weights"), p.codec);
      const LocalNet& src_net = role == PartyRole::Source ? net : peer_net;
      const LocalNet& tgt_net = role == PartyRole::Source ? peer_net : net;
      SourceIterBundle sb = compute_source_iter(src_net, split.source, p.hp);
      std::size_t n = labels.size();
      std::size_t agree = 0;
      for (std::size_t i = 0; i < n; ++i) {
        auto u = tgt_net.forward(split.target.x.row(i));
        double psi = translator_psi(sb.lambda, u);
        int want = psi >= 0 ? 1 : -1;
        agree += want == labels[i];
      }
      r->agreement = n ? double(agree) / double(n) : 1.0;
    }
    if (out) *out = r; else delete r;
    return SFTL_OK;
  } catch (const std::exception& e) {
    fill_err(err, err_len, e.what());
    return classify(e);
  }
}

sftl_status sftl_generate(const sftl_config* cfg, char* err, size_t err_len) {
  try {
    std::string path = cfg->get("out");
    if (path.empty()) throw std::invalid_argument("out path required");
    write_synthetic_csv(path, std::uint32_t(cfg->uint("gen_samples", 100)),
                        std::uint32_t(cfg->uint("gen_features_s", 4)),
                        std::uint32_t(cfg->uint("gen_features_t", 4)),
                        cfg->uint("seed", 1), cfg->num("noise", 0.0));
    return SFTL_OK;
  } catch (const std::exception& e) {
    fill_err(err, err_len, e.what());
    return classify(e);
  }
}

sftl_status sftl_offline_cost(const char* engine, uint64_t triples, double* bits,
                              double* seconds) {
  if (!engine || !bits || !seconds) return SFTL_ERR_ARGS;
  EngineKind kind;
  if (std::strcmp(engine, "sh") == 0) kind = EngineKind::SemiHonest;
  else if (std::strcmp(engine, "mal") == 0) kind = EngineKind::Malicious;
  else return SFTL_ERR_ARGS;
  OfflineCost cost = estimate_offline_cost(triples, kind);
  *bits = cost.bits;
  *seconds = cost.seconds.value_or(-1.0);
  return SFTL_OK;
}

uint32_t sftl_result_iterations(const sftl_result* r) { return r ? r->iterations : 0; }
int sftl_result_converged(const sftl_result* r) { return r && r->converged ? 1 : 0; }
uint64_t sftl_result_bytes_sent(const sftl_result* r) { return r ? r->bytes_sent : 0; }
uint64_t sftl_result_bytes_received(const sftl_result* r) { return r ? r->bytes_received : 0; }
uint64_t sftl_result_rounds(const sftl_result* r) { return r ? r->rounds : 0; }
uint64_t sftl_result_triples_used(const sftl_result* r) { return r ? r->triples : 0; }
size_t sftl_result_label_count(const sftl_result* r) { return r ? r->labels.size() : 0; }
int sftl_result_label(const sftl_result* r, size_t i) {
  return r && i < r->labels.size() ? r->labels[i] : 0;
}
double sftl_result_agreement(const sftl_result* r) { return r ? r->agreement : -1.0; }
void sftl_result_free(sftl_result* r) { delete r; }

}  // extern "C"
