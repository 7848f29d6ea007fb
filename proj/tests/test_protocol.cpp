#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "harness.hpp"
#include "oracle.hpp"

using namespace sftl;
using namespace sftl::test;

namespace {

const EngineKind kBoth[] = {EngineKind::SemiHonest, EngineKind::Malicious};

TrainShape shape_of(const oracle::Instance& inst, std::uint32_t max_iter) {
  TrainShape s;
  s.n_source = std::uint32_t(inst.x_s.rows);
  s.n_target = std::uint32_t(inst.x_t.rows);
  s.n_overlap = std::uint32_t(inst.ov_s.size());
  s.n_labeled = std::uint32_t(inst.lab_t.size());
  s.hidden = inst.d;
  s.in_source = std::uint32_t(inst.x_s.cols);
  s.in_target = std::uint32_t(inst.x_t.cols);
  s.max_iter = max_iter;
  return s;
}

struct SessionOut {
  TrainResult source, target;
  DebugHooks dbg_source, dbg_target;
  ChannelStats stats_source;
  EngineAudit audit_source, audit_target;
  MaterialCounts consumed_source;
  MaterialCounts provisioned;
  PairOutcome outcome;
};

SessionOut train_both(EngineKind kind, const oracle::Instance& inst, SessionParams p,
                      bool reveal_loss = false, CheatPlan cheat_source = {},
                      CheatPlan cheat_target = {}) {
  SourceData src;
  TargetData tgt;
  oracle::to_party_views(inst, &src, &tgt);
  JointDims dims{std::uint32_t(inst.lab_t.size()), std::uint32_t(inst.ov_s.size()), inst.d,
                 std::uint32_t(inst.x_s.cols), std::uint32_t(inst.x_t.cols)};
  p.d = inst.d;
  p.hp.gamma = inst.hp.gamma;
  p.hp.lambda = inst.hp.lambda;
  p.hp.kappa_align = inst.hp.kappa_align;

  MaterialCounts counts = count_required_material(shape_of(inst, p.hp.max_iter), kind);
  DealerConfig dc;
  dc.engine = kind;
  dc.counts = counts;
  for (int i = 0; i < 8; ++i) dc.seed[i] = std::uint8_t(p.seed >> (8 * i));
  auto [s0, s1] = deal(dc);
  auto st0 = std::make_shared<PreprocStore>(std::move(s0));
  auto st1 = std::make_shared<PreprocStore>(std::move(s1));

  SessionOut out;
  out.provisioned = counts;
  out.dbg_source.reveal_loss = reveal_loss;
  out.dbg_target.reveal_loss = reveal_loss;
  out.outcome = run_pair_capture(
      [&, st0](Channel& ch) {
        auto e = make_engine(kind, PartyRole::Source, std::move(*st0), &ch, p.seed, p.codec);
        e->set_cheat(cheat_source);
        out.source = run_training(*e, p, dims, &src, nullptr,
                                  reveal_loss ? &out.dbg_source : nullptr);
        out.stats_source = ch.stats();
        out.audit_source = e->audit();
        out.consumed_source = e->store().consumed();
      },
      [&, st1](Channel& ch) {
        auto e = make_engine(kind, PartyRole::Target, std::move(*st1), &ch, p.seed, p.codec);
        e->set_cheat(cheat_target);
        out.target = run_training(*e, p, dims, nullptr, &tgt,
                                  reveal_loss ? &out.dbg_target : nullptr);
        out.audit_target = e->audit();
      });
  return out;
}

}  // namespace

TEST_CASE("secure less-than-zero: exhaustive small range") {
  for (auto kind : kBoth) {
    Algebra alg = Algebra::for_engine(kind);
    std::vector<Elem> zs;
    std::vector<bool> want;
    for (int v = -256; v <= 256; ++v) {
      zs.push_back(alg.from_lift(v));
      want.push_back(v < 0);
    }
    MaterialCounts counts = ample_material(zs.size() * 70, zs.size() + 16, zs.size(), 8);
    run_engines(
        kind, counts,
        [&](Engine& e) {
          auto sh = e.input_self(zs);
          auto bits = secure_ltz(e, sh);
          auto got = e.open(bits, OpenTag::DebugProbe);
          e.check();
          for (std::size_t i = 0; i < zs.size(); ++i) {
            INFO("z = ", int(i) - 256, " kind ", int(kind));
            CHECK(got[i] == Elem(want[i] ? 1 : 0));
          }
        },
        [&](Engine& e) {
          auto sh = e.input_peer(zs.size());
          auto bits = secure_ltz(e, sh);
          e.open(bits, OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("secure less-than-zero on random fixed-point values") {
  FixedCodec codec;
  ElemRng rng(6);
  for (auto kind : kBoth) {
    Algebra alg = Algebra::for_engine(kind);
    std::vector<Elem> zs;
    std::vector<bool> want;
    for (int i = 0; i < 300; ++i) {
      double v = 2000.0 * (2.0 * rng.canonical() - 1.0);
      zs.push_back(codec.encode(v, alg, 2));
      want.push_back(v < 0);
    }
    zs.push_back(0);
    want.push_back(false);  // strict comparison at the boundary
    MaterialCounts counts = ample_material(zs.size() * 70, zs.size() + 16, zs.size(), 8);
    run_engines(
        kind, counts,
        [&](Engine& e) {
          auto bits = secure_ltz(e, e.input_self(zs));
          auto got = e.open(bits, OpenTag::DebugProbe);
          e.check();
          for (std::size_t i = 0; i < zs.size(); ++i)
            CHECK(got[i] == Elem(want[i] ? 1 : 0));
        },
        [&](Engine& e) {
          e.open(secure_ltz(e, e.input_peer(zs.size())), OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("convergence check bit") {
  FixedCodec codec;
  for (auto kind : kBoth) {
    Algebra alg = Algebra::for_engine(kind);
    run_engines(
        kind, ample_material(1400, 64, 20, 8),
        [&](Engine& e) {
          auto mk = [&](double v) {
            return e.input_self(std::vector<Elem>{codec.encode(v, alg, 2)});
          };
          // L_prev = L with eps > 0: 0 < eps, so the bit is 1
          CHECK(convergence_check(e, mk(1.25), mk(1.25), 0.5));
          // L_prev - L = 2 eps: not below eps
          CHECK(!convergence_check(e, mk(1.0), mk(2.0), 0.5));
          ElemRng rng(12);
          for (int i = 0; i < 16; ++i) {
            double prev = 4.0 * rng.canonical(), cur = 4.0 * rng.canonical();
            double eps = rng.canonical();
            bool clear = prev - cur < eps;
            CHECK(convergence_check(e, mk(cur), mk(prev), eps) == clear);
          }
        },
        [&](Engine& e) {
          auto mk = [&] { return e.input_peer(1); };
          convergence_check(e, mk(), mk(), 0.5);
          convergence_check(e, mk(), mk(), 0.5);
          ElemRng rng(12);
          for (int i = 0; i < 16; ++i) {
            (void)rng.canonical();
            (void)rng.canonical();
            double eps = rng.canonical();
            convergence_check(e, mk(), mk(), eps);
          }
        });
  }
}

TEST_CASE("convergence agrees with cleartext on random triples") {
  // batched sweep: 1000 differences z = L_prev - L - eps through one ltz
  FixedCodec codec;
  for (auto kind : kBoth) {
    Algebra alg = Algebra::for_engine(kind);
    ElemRng rng(33);
    std::vector<Elem> zs(1000);
    std::vector<bool> want(1000);
    for (int i = 0; i < 1000; ++i) {
      Elem prev = codec.encode(6.0 * rng.canonical(), alg, 2);
      Elem cur = codec.encode(6.0 * rng.canonical(), alg, 2);
      Elem eps = codec.encode(rng.canonical(), alg, 2);
      zs[i] = alg.sub(alg.sub(prev, cur), eps);
      want[i] = alg.lift(zs[i]) < 0;
    }
    run_engines(
        kind, ample_material(70000, 1024, 1000, 8),
        [&](Engine& e) {
          auto got = e.open(secure_ltz(e, e.input_self(zs)), OpenTag::DebugProbe);
          e.check();
          int bad = 0;
          for (int i = 0; i < 1000; ++i) bad += got[i] != Elem(want[i] ? 1 : 0);
          CHECK(bad == 0);
        },
        [&](Engine& e) {
          e.open(secure_ltz(e, e.input_peer(1000)), OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("handshake accepts twins and rejects mismatches") {
  SessionParams p;
  JointDims dims{4, 3, 8, 2, 2};
  std::array<std::uint8_t, 32> digest{};
  std::array<std::uint8_t, 16> session{};
  digest[0] = 7;

  SUBCASE("identical configs succeed and swap private dims") {
    run_pair(
        [&](Channel& ch) {
          PeerDims pd = handshake(ch, PartyRole::Source, p, dims, 10, 3, digest, session);
          CHECK(pd.rows == 12);
          CHECK(pd.in_features == 5);
        },
        [&](Channel& ch) {
          PeerDims pd = handshake(ch, PartyRole::Target, p, dims, 12, 5, digest, session);
          CHECK(pd.rows == 10);
          CHECK(pd.in_features == 3);
        });
  }
  SUBCASE("differing frac_bits abort") {
    auto out = run_pair_capture(
        [&](Channel& ch) {
          SessionParams q = p;
          q.codec.frac_bits = 14;
          handshake(ch, PartyRole::Source, q, dims, 10, 3, digest, session);
        },
        [&](Channel& ch) { handshake(ch, PartyRole::Target, p, dims, 10, 3, digest, session); });
    CHECK(failed_with<MismatchError>(out.source_error));
    CHECK(failed_with<MismatchError>(out.target_error));
  }
  SUBCASE("differing digests abort") {
    auto out = run_pair_capture(
        [&](Channel& ch) {
          auto d2 = digest;
          d2[31] ^= 1;
          handshake(ch, PartyRole::Source, p, dims, 10, 3, d2, session);
        },
        [&](Channel& ch) { handshake(ch, PartyRole::Target, p, dims, 10, 3, digest, session); });
    CHECK(failed_with<MismatchError>(out.source_error));
  }
  SUBCASE("same role on both ends aborts") {
    auto out = run_pair_capture(
        [&](Channel& ch) { handshake(ch, PartyRole::Source, p, dims, 10, 3, digest, session); },
        [&](Channel& ch) { handshake(ch, PartyRole::Source, p, dims, 10, 3, digest, session); });
    CHECK(failed_with<MismatchError>(out.source_error));
  }
  SUBCASE("engine kind mismatch aborts") {
    auto out = run_pair_capture(
        [&](Channel& ch) {
          SessionParams q = p;
          q.engine = EngineKind::Malicious;
          handshake(ch, PartyRole::Source, q, dims, 10, 3, digest, session);
        },
        [&](Channel& ch) { handshake(ch, PartyRole::Target, p, dims, 10, 3, digest, session); });
    CHECK(failed_with<MismatchError>(out.source_error));
  }
}

TEST_CASE("m = 0 runs exactly one iteration and no convergence check") {
  auto inst = oracle::random_instance(3, 10, 9, 4, 5, 3, 3, 4);
  for (auto kind : kBoth) {
    SessionParams p;
    p.engine = kind;
    p.hp.max_iter = 0;
    p.seed = 5;
    auto out = train_both(kind, inst, p);
    REQUIRE(out.outcome.ok());
    CHECK(out.source.iterations == 1);
    CHECK(!out.source.converged);
    CHECK(out.consumed_source.bit_packs == 0);  // no comparison ran
    CHECK(out.source.metrics.size() == 1);
  }
}

TEST_CASE("huge tolerance stops at the first convergence check") {
  auto inst = oracle::random_instance(4, 10, 9, 4, 5, 3, 3, 4);
  for (auto kind : kBoth) {
    SessionParams p;
    p.engine = kind;
    p.hp.max_iter = 30;
    p.hp.eps = 1e6;  // larger than any loss this instance can reach
    p.seed = 6;
    auto out = train_both(kind, inst, p);
    REQUIRE(out.outcome.ok());
    CHECK(out.source.converged);
    CHECK(out.source.iterations == 2);  // iteration 0 has no L_prev
    CHECK(out.consumed_source.bit_packs == 1);
  }
}

TEST_CASE("secure training tracks the float-oracle trajectory") {
  auto inst = oracle::random_instance(8, 14, 12, 6, 7, 3, 4, 5);
  for (auto kind : kBoth) {
    SessionParams p;
    p.engine = kind;
    p.hp.max_iter = 9;
    p.hp.eps = 0.0;  // never stop early
    p.hp.eta = 0.05;
    p.seed = 9;
    auto out = train_both(kind, inst, p, /*reveal_loss=*/true);
    REQUIRE(out.outcome.ok());
    REQUIRE(out.source.iterations == 10);
    auto plain = oracle::train(inst, p.seed, 10, p.hp.eta);
    REQUIRE(out.dbg_source.loss_trace.size() == 10);
    for (int i = 0; i < 10; ++i) {
      double got = out.dbg_source.loss_trace[i];
      double want = plain.losses[i];
      CHECK(std::fabs(got - want) / std::max(1.0, std::fabs(want)) < 1e-3);
    }
    // loss decreases over the first iterations on this instance
    CHECK(out.dbg_source.loss_trace[5] < out.dbg_source.loss_trace[0]);
    // final weights close to the plain run
    for (std::size_t i = 0; i < plain.w_s.a.size(); ++i)
      CHECK(std::fabs(out.source.net.w.a[i] - plain.w_s.a[i]) < 1e-2);
    for (std::size_t i = 0; i < plain.w_t.a.size(); ++i)
      CHECK(std::fabs(out.target.net.w.a[i] - plain.w_t.a[i]) < 1e-2);
  }
}

TEST_CASE("semi-honest and malicious runs agree on the loss trajectory") {
  auto inst = oracle::random_instance(15, 12, 11, 5, 6, 3, 3, 4);
  SessionParams p;
  p.hp.max_iter = 6;
  p.hp.eps = 0.0;
  p.seed = 21;
  p.engine = EngineKind::SemiHonest;
  auto sh = train_both(EngineKind::SemiHonest, inst, p, true);
  p.engine = EngineKind::Malicious;
  auto mal = train_both(EngineKind::Malicious, inst, p, true);
  REQUIRE(sh.outcome.ok());
  REQUIRE(mal.outcome.ok());
  REQUIRE(sh.dbg_source.loss_trace.size() == mal.dbg_source.loss_trace.size());
  for (std::size_t i = 0; i < sh.dbg_source.loss_trace.size(); ++i)
    CHECK(std::fabs(sh.dbg_source.loss_trace[i] - mal.dbg_source.loss_trace[i]) /
              std::max(1.0, std::fabs(sh.dbg_source.loss_trace[i])) <
          1e-3);
}

TEST_CASE("material consumption equals the predicted demand exactly") {
  auto inst = oracle::random_instance(18, 11, 10, 4, 6, 3, 4, 4);
  for (auto kind : kBoth) {
    SessionParams p;
    p.engine = kind;
    p.hp.max_iter = 4;
    p.hp.eps = 0.0;  // run every iteration so the budget is fully used
    p.seed = 11;
    auto out = train_both(kind, inst, p);
    REQUIRE(out.outcome.ok());
    CHECK(out.consumed_source == out.provisioned);
  }
}

TEST_CASE("round count follows the closed form") {
  auto inst = oracle::random_instance(19, 11, 10, 4, 6, 3, 4, 4);
  for (auto kind : kBoth) {
    SessionParams p;
    p.engine = kind;
    p.hp.max_iter = 3;
    p.hp.eps = 0.0;
    p.seed = 12;
    auto out = train_both(kind, inst, p);
    REQUIRE(out.outcome.ok());
    // per iteration: 1 input round, 12 multiplication batches (6 loss,
    // 3 target-grad, 3 source-grad); convergence adds the masked open,
    // the borrow levels, the sign combine and the bit reveal.
    std::uint64_t per_iter, conv, setup = 0;
    if (kind == EngineKind::SemiHonest) {
      per_iter = 1 + 12 + 2;       // inputs, muls, two directed outputs
      conv = 1 + 63 + 1 + 1;       // masked open, borrow, combine, bit
    } else {
      per_iter = 2 + 12 + 3 + 14;  // + loss inputs, trunc opens, outputs+checks
      conv = 1 + 64 + 1 + 1 + 4;   // + the post-bit batched check
    }
    std::uint64_t iters = out.source.iterations;
    std::uint64_t want = setup + per_iter * iters + conv * (iters - 1);
    std::uint64_t got = 0;
    for (const auto& m : out.source.metrics) got += m.rounds;
    CHECK(got == want);
  }
}

TEST_CASE("fixed seeds reproduce weights and protocol metrics bit-for-bit") {
  auto inst = oracle::random_instance(22, 10, 9, 4, 5, 3, 3, 4);
  for (auto kind : kBoth) {
    SessionParams p;
    p.engine = kind;
    p.hp.max_iter = 3;
    p.seed = 77;
    auto a = train_both(kind, inst, p);
    auto b = train_both(kind, inst, p);
    REQUIRE(a.outcome.ok());
    REQUIRE(b.outcome.ok());
    CHECK(a.source.net.w.a == b.source.net.w.a);
    CHECK(a.target.net.w.a == b.target.net.w.a);
    REQUIRE(a.source.metrics.size() == b.source.metrics.size());
    for (std::size_t i = 0; i < a.source.metrics.size(); ++i) {
      const auto &ma = a.source.metrics[i], &mb = b.source.metrics[i];
      CHECK(ma.bytes_sent == mb.bytes_sent);
      CHECK(ma.bytes_received == mb.bytes_received);
      CHECK(ma.rounds == mb.rounds);
      CHECK(ma.triples == mb.triples);
      CHECK(ma.masks == mb.masks);
      CHECK(ma.bit_packs == mb.bit_packs);
      CHECK(ma.trunc_pairs == mb.trunc_pairs);
    }
  }
}

TEST_CASE("information flow: only masked openings and the bit are mutual") {
  auto inst = oracle::random_instance(25, 10, 9, 4, 5, 3, 3, 4);
  for (auto kind : kBoth) {
    SessionParams p;
    p.engine = kind;
    p.hp.max_iter = 2;
    p.hp.eps = 0.0;
    p.seed = 31;
    auto out = train_both(kind, inst, p);
    REQUIRE(out.outcome.ok());
    for (const auto& ev : out.audit_source.opens) {
      bool allowed = ev.tag == OpenTag::BeaverOpen || ev.tag == OpenTag::TruncMasked ||
                     ev.tag == OpenTag::CompareMasked || ev.tag == OpenTag::ConvergenceBit ||
                     ev.tag == OpenTag::OutputMasked;
      CHECK(allowed);
    }
    // gradient reveals go to their owner, alternating T then S each iteration
    REQUIRE(out.audit_source.outputs.size() == 2 * out.source.iterations);
    for (std::size_t i = 0; i < out.audit_source.outputs.size(); ++i) {
      const auto& ev = out.audit_source.outputs[i];
      CHECK(ev.recipient == (i % 2 == 0 ? PartyRole::Target : PartyRole::Source));
      CHECK(ev.masked == (kind == EngineKind::Malicious));
    }
  }
}

TEST_CASE("every tamper mode aborts the honest party before gradients leak") {
  auto inst = oracle::random_instance(26, 10, 9, 4, 5, 3, 3, 4);
  ElemRng rng(40);
  for (int trial = 0; trial < 9; ++trial) {
    CheatPlan cheat;
    cheat.mode = static_cast<CheatPlan::Mode>(1 + trial % 3);
    cheat.target = rng.below(50);
    cheat.delta = 1 + rng.below(1000);
    bool source_cheats = trial % 2 == 0;
    SessionParams p;
    p.engine = EngineKind::Malicious;
    p.hp.max_iter = 2;
    p.seed = 50 + trial;
    auto out = train_both(EngineKind::Malicious, inst, p, false,
                          source_cheats ? cheat : CheatPlan{},
                          source_cheats ? CheatPlan{} : cheat);
    CHECK(!out.outcome.ok());
    auto& honest_err = source_cheats ? out.outcome.target_error : out.outcome.source_error;
    bool aborted = failed_with<AbortError>(honest_err) || failed_with<TransportError>(honest_err);
    CHECK(aborted);
  }
}

TEST_CASE("federated prediction agrees with the cleartext oracle") {
  auto inst = oracle::random_instance(28, 12, 10, 5, 6, 3, 4, 5);
  SessionParams p;
  p.hp.max_iter = 4;
  p.seed = 61;
  for (auto kind : kBoth) {
    p.engine = kind;
    auto trained = train_both(kind, inst, p);
    REQUIRE(trained.outcome.ok());

    Mat samples(50, inst.x_t.cols);
    ElemRng rng(71);
    for (auto& v : samples.a) v = 2.0 * rng.canonical() - 1.0;
    auto want = oracle::predict_labels(inst, trained.source.net.w, trained.target.net.w, samples);

    TrainShape ps;
    ps.predict_samples = 50;
    ps.hidden = inst.d;
    ps.max_iter = 0;
    ps.n_labeled = 0;
    ps.n_overlap = 0;
    // training part of the walk contributes the non-predict baseline
    MaterialCounts counts = count_required_material(ps, kind);
    counts += ample_material(64, 8, 0, 8);  // slack for the empty-iteration walk

    SourceData src;
    TargetData tgt;
    oracle::to_party_views(inst, &src, &tgt);
    std::vector<int> got_s, got_t;
    DealerConfig dc;
    dc.engine = kind;
    dc.counts = counts;
    dc.seed[0] = 99;
    auto [s0, s1] = deal(dc);
    auto st0 = std::make_shared<PreprocStore>(std::move(s0));
    auto st1 = std::make_shared<PreprocStore>(std::move(s1));
    run_pair(
        [&, st0](Channel& ch) {
          auto e = make_engine(kind, PartyRole::Source, std::move(*st0), &ch, 15);
          LocalNet net{std::uint32_t(inst.x_s.cols), inst.d, trained.source.net.w};
          SourceIterBundle sb = compute_source_iter(net, src, inst.hp);
          got_s = run_predict(*e, sb.lambda, nullptr, 50, inst.d);
        },
        [&, st1](Channel& ch) {
          auto e = make_engine(kind, PartyRole::Target, std::move(*st1), &ch, 16);
          LocalNet net{std::uint32_t(inst.x_t.cols), inst.d, trained.target.net.w};
          Mat c_rows = net.forward_all(samples);
          got_t = run_predict(*e, {}, &c_rows, 50, inst.d);
        });
    CHECK(got_s == want);
    CHECK(got_t == want);
  }
}

TEST_CASE("predict tie at psi = 0 maps to +1") {
  // Lambda = 0 forces psi = 0 for every sample.
  for (auto kind : kBoth) {
    MaterialCounts counts = ample_material(600, 32, 8, 8);
    run_engines(
        kind, counts,
        [&](Engine& e) {
          std::vector<double> lambda(4, 0.0);
          auto labels = run_predict(e, lambda, nullptr, 3, 4);
          CHECK(labels == std::vector<int>{1, 1, 1});
        },
        [&](Engine& e) {
          Mat c(3, 4);
          for (auto& v : c.a) v = 0.25;
          auto labels = run_predict(e, {}, &c, 3, 4);
          CHECK(labels == std::vector<int>{1, 1, 1});
        });
  }
}
