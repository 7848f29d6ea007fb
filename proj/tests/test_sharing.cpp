#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "harness.hpp"

using namespace sftl;
using namespace sftl::test;

namespace {
const EngineKind kBoth[] = {EngineKind::SemiHonest, EngineKind::Malicious};
}

TEST_CASE("input sharing round trips") {
  for (auto kind : kBoth) {
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          auto sh = e.input_self(std::vector<Elem>{5});
          CHECK(e.open(sh, OpenTag::DebugProbe)[0] == 5);
          auto z = e.input_self(std::vector<Elem>{0});
          CHECK(e.open(z, OpenTag::DebugProbe)[0] == 0);
          auto theirs = e.input_peer(1);
          CHECK(e.open(theirs, OpenTag::DebugProbe)[0] == 1234567);
          e.check();
        },
        [&](Engine& e) {
          auto sh = e.input_peer(1);
          CHECK(e.open(sh, OpenTag::DebugProbe)[0] == 5);
          auto z = e.input_peer(1);
          CHECK(e.open(z, OpenTag::DebugProbe)[0] == 0);
          auto mine = e.input_self(std::vector<Elem>{1234567});
          CHECK(e.open(mine, OpenTag::DebugProbe)[0] == 1234567);
          e.check();
        });
  }
}

TEST_CASE("100 random inputs round trip under both engines") {
  for (auto kind : kBoth) {
    ElemRng vals(77);
    Algebra alg = Algebra::for_engine(kind);
    std::vector<Elem> xs(100);
    for (auto& x : xs) x = vals.uniform(alg);
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          auto [mine, theirs] = e.input_exchange(xs, 0);
          CHECK(e.open(mine, OpenTag::DebugProbe) == xs);
          e.check();
        },
        [&](Engine& e) {
          auto [mine, theirs] = e.input_exchange({}, 100);
          CHECK(e.open(theirs, OpenTag::DebugProbe) == xs);
          e.check();
        });
  }
}

TEST_CASE("linear layer: add, scalar_mul, add_public") {
  for (auto kind : kBoth) {
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          auto x = e.input_self(std::vector<Elem>{3});
          auto y = e.input_peer(1);
          CHECK(e.open(e.add(x, y), OpenTag::DebugProbe)[0] == 7);
          CHECK(e.open(e.scalar_mul(x, 0), OpenTag::DebugProbe)[0] == 0);
          CHECK(e.open(e.add_public(x, Elem(10)), OpenTag::DebugProbe)[0] == 13);
          CHECK(e.open(e.sub(y, x), OpenTag::DebugProbe)[0] == 1);
          e.check();  // add_public must keep MACs consistent
        },
        [&](Engine& e) {
          auto x = e.input_peer(1);
          auto y = e.input_self(std::vector<Elem>{4});
          e.open(e.add(x, y), OpenTag::DebugProbe);
          e.open(e.scalar_mul(x, 0), OpenTag::DebugProbe);
          e.open(e.add_public(x, Elem(10)), OpenTag::DebugProbe);
          e.open(e.sub(y, x), OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("share shape mismatch raises") {
  run_engines(
      EngineKind::SemiHonest, ample_material(),
      [&](Engine& e) {
        auto x = e.input_self(std::vector<Elem>{1, 2});
        ShareVec other;
        other.val = {1};
        CHECK_THROWS_AS(e.add(x, other), MismatchError);
      },
      [&](Engine& e) { e.input_peer(2); });
}

TEST_CASE("beaver multiplication") {
  for (auto kind : kBoth) {
    FixedCodec codec;
    Algebra alg = Algebra::for_engine(kind);
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          auto x = e.input_self(std::vector<Elem>{3});
          auto y = e.input_peer(1);
          CHECK(e.open(e.mul(x, y), OpenTag::DebugProbe)[0] == 12);

          // multiplicative identity in fixed point, after truncation
          auto v = e.input_self(std::vector<Elem>{codec.encode(2.5, alg)});
          auto one = e.input_peer(1);
          auto prod = e.trunc(e.mul(v, one));
          double got = codec.decode(e.open(prod, OpenTag::DebugProbe)[0], alg);
          CHECK(std::fabs(got - 2.5) <= 2 * codec.unit());
          e.check();
        },
        [&](Engine& e) {
          auto x = e.input_peer(1);
          auto y = e.input_self(std::vector<Elem>{4});
          e.open(e.mul(x, y), OpenTag::DebugProbe);
          auto v = e.input_peer(1);
          auto one = e.input_self(std::vector<Elem>{codec.encode(1.0, alg)});
          e.open(e.trunc(e.mul(v, one)), OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("shared inner product of length 32 matches the cleartext oracle") {
  for (auto kind : kBoth) {
    FixedCodec codec;
    Algebra alg = Algebra::for_engine(kind);
    ElemRng rng(5);
    std::vector<double> xs(32), ys(32);
    double want = 0;
    for (int i = 0; i < 32; ++i) {
      xs[i] = 2.0 * rng.canonical() - 1.0;
      ys[i] = 2.0 * rng.canonical() - 1.0;
      want += xs[i] * ys[i];
    }
    std::vector<Elem> xe(32), ye(32);
    for (int i = 0; i < 32; ++i) {
      xe[i] = codec.encode(xs[i], alg);
      ye[i] = codec.encode(ys[i], alg);
    }
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          auto x = e.input_self(xe);
          auto y = e.input_peer(32);
          auto prod = e.mul(x, y);
          auto total = group_sums(e, prod, 32);
          double got = codec.decode(e.open(total, OpenTag::DebugProbe)[0], e.alg(), 2);
          CHECK(std::fabs(got - want) < 1e-3);
          e.check();
        },
        [&](Engine& e) {
          auto x = e.input_peer(32);
          auto y = e.input_self(ye);
          auto total = group_sums(e, e.mul(x, y), 32);
          e.open(total, OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("shared truncation on fixed values") {
  for (auto kind : kBoth) {
    FixedCodec codec;
    Algebra alg = Algebra::for_engine(kind);
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          // a scale-2 encoding of 6.0, truncated back to scale 1
          auto v = e.input_self(std::vector<Elem>{codec.encode(6.0, alg, 2)});
          auto t = e.trunc(v);
          double got = codec.decode(e.open(t, OpenTag::DebugProbe)[0], alg);
          CHECK(std::fabs(got - 6.0) <= 2 * codec.unit());
          auto z = e.trunc(e.input_self(std::vector<Elem>{0}));
          double gz = codec.decode(e.open(z, OpenTag::DebugProbe)[0], alg);
          CHECK(std::fabs(gz) <= 2 * codec.unit());
          e.check();
        },
        [&](Engine& e) {
          e.open(e.trunc(e.input_peer(1)), OpenTag::DebugProbe);
          e.open(e.trunc(e.input_peer(1)), OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("truncation error stays below 2^-15 over 10^4 random products") {
  for (auto kind : kBoth) {
    FixedCodec codec;
    Algebra alg = Algebra::for_engine(kind);
    const int n = 10000;
    ElemRng rng(17);
    std::vector<Elem> xe(n), ye(n);
    std::vector<__int128> exact(n);
    for (int i = 0; i < n; ++i) {
      double x = 8.0 * (2.0 * rng.canonical() - 1.0);
      double y = 8.0 * (2.0 * rng.canonical() - 1.0);
      xe[i] = codec.encode(x, alg);
      ye[i] = codec.encode(y, alg);
      exact[i] = (__int128)alg.lift(xe[i]) * alg.lift(ye[i]) >> codec.frac_bits;
    }
    MaterialCounts counts = ample_material(n + 64, n + 64, 4, n + 8);
    run_engines(
        kind, counts,
        [&](Engine& e) {
          auto x = e.input_self(xe);
          auto y = e.input_peer(n);
          auto t = e.trunc(e.mul(x, y));
          auto opened = e.open(t, OpenTag::DebugProbe);
          e.check();
          int large = 0;
          for (int i = 0; i < n; ++i) {
            double err = std::ldexp(double(alg.lift(opened[i]) - exact[i]), -codec.frac_bits);
            if (std::fabs(err) > std::ldexp(1.0, -15)) ++large;
          }
          CHECK(large == 0);
        },
        [&](Engine& e) {
          auto x = e.input_peer(n);
          auto y = e.input_self(ye);
          e.open(e.trunc(e.mul(x, y)), OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("partial open and one batched check over many openings") {
  run_engines(
      EngineKind::Malicious, ample_material(),
      [&](Engine& e) {
        auto sh = e.input_self(std::vector<Elem>{7});
        CHECK(e.open(sh, OpenTag::DebugProbe)[0] == 7);
        auto a = e.input_self(std::vector<Elem>{2});
        auto b = e.input_peer(1);
        CHECK(e.open(e.add(a, b), OpenTag::DebugProbe)[0] == 5);
        for (int i = 0; i < 97; ++i) e.open(a, OpenTag::DebugProbe);
        auto& mal = dynamic_cast<MaliciousEngine&>(e);
        CHECK(mal.open_log_size() == 99);
        e.check();  // one batched verification of everything
        CHECK(mal.open_log_size() == 0);
      },
      [&](Engine& e) {
        auto sh = e.input_peer(1);
        e.open(sh, OpenTag::DebugProbe);
        auto a = e.input_peer(1);
        auto b = e.input_self(std::vector<Elem>{3});
        e.open(e.add(a, b), OpenTag::DebugProbe);
        for (int i = 0; i < 97; ++i) e.open(a, OpenTag::DebugProbe);
        e.check();
      });
}

TEST_CASE("output_to reveals only to the recipient") {
  for (auto kind : kBoth) {
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          auto sh = e.input_self(std::vector<Elem>{9});
          auto out = e.output_to(PartyRole::Target, sh);
          CHECK(!out.has_value());  // the source learns nothing new
          e.check();
        },
        [&](Engine& e) {
          auto sh = e.input_peer(1);
          auto out = e.output_to(PartyRole::Target, sh);
          REQUIRE(out.has_value());
          CHECK((*out)[0] == 9);
          e.check();
        });
  }
}

TEST_CASE("single shifted opening aborts the malicious engine") {
  CheatPlan cheat;
  cheat.mode = CheatPlan::Mode::Open;
  cheat.target = 0;
  cheat.delta = 1;
  auto out = run_engines_capture(
      EngineKind::Malicious, ample_material(),
      [&](Engine& e) {
        e.set_cheat(cheat);
        auto sh = e.input_self(std::vector<Elem>{11});
        e.open(sh, OpenTag::DebugProbe);
        e.check();
      },
      [&](Engine& e) {
        auto sh = e.input_peer(1);
        e.open(sh, OpenTag::DebugProbe);
        e.check();
      });
  CHECK(failed_with<AbortError>(out.target_error));  // honest party aborts
  CHECK(!out.ok());
}

TEST_CASE("tampered output share aborts before the reveal is accepted") {
  CheatPlan cheat;
  cheat.mode = CheatPlan::Mode::Output;
  cheat.target = 0;
  cheat.delta = 3;
  auto out = run_engines_capture(
      EngineKind::Malicious, ample_material(),
      [&](Engine& e) {
        e.set_cheat(cheat);
        auto sh = e.input_self(std::vector<Elem>{21});
        e.output_to(PartyRole::Target, sh);
      },
      [&](Engine& e) {
        auto sh = e.input_peer(1);
        e.output_to(PartyRole::Target, sh);
      });
  CHECK(failed_with<AbortError>(out.target_error));
}

TEST_CASE("corrupted product share aborts at the next check") {
  CheatPlan cheat;
  cheat.mode = CheatPlan::Mode::Share;
  cheat.target = 0;
  cheat.delta = 42;
  auto out = run_engines_capture(
      EngineKind::Malicious, ample_material(),
      [&](Engine& e) {
        e.set_cheat(cheat);
        auto x = e.input_self(std::vector<Elem>{3});
        auto y = e.input_peer(1);
        auto z = e.mul(x, y);
        e.open(z, OpenTag::DebugProbe);
        e.check();
      },
      [&](Engine& e) {
        auto x = e.input_peer(1);
        auto y = e.input_self(std::vector<Elem>{4});
        auto z = e.mul(x, y);
        e.open(z, OpenTag::DebugProbe);
        e.check();
      });
  CHECK(failed_with<AbortError>(out.target_error));
}

TEST_CASE("repeated tampering trials always abort") {
  // The full 1000-trial sweep lives in the acceptance suite.
  ElemRng rng(23);
  for (int trial = 0; trial < 60; ++trial) {
    CheatPlan cheat;
    cheat.mode = static_cast<CheatPlan::Mode>(1 + trial % 3);
    cheat.target = rng.below(4);
    cheat.delta = rng.uniform(Algebra::field());
    if (cheat.delta == 0) cheat.delta = 1;
    bool source_cheats = trial % 2 == 0;
    auto body = [&](Engine& e, bool cheater) {
      if (cheater) e.set_cheat(cheat);
      std::vector<Elem> mine{Elem(trial + 1), Elem(trial + 2)};
      auto [self_sh, peer_sh] = e.input_exchange(mine, 2);
      auto prod = e.mul(self_sh, peer_sh);
      e.open(prod, OpenTag::DebugProbe);
      e.output_to(PartyRole::Source, self_sh);
      e.output_to(PartyRole::Target, peer_sh);
      e.check();
    };
    auto out = run_engines_capture(
        EngineKind::Malicious, ample_material(),
        [&](Engine& e) { body(e, source_cheats); },
        [&](Engine& e) { body(e, !source_cheats); });
    // the honest party must abort; the cheater may fail either way
    CHECK(failed_with<AbortError>(source_cheats ? out.target_error : out.source_error));
  }
}

TEST_CASE("random linear+multiplication circuits reconstruct exactly") {
  for (auto kind : kBoth) {
    Algebra alg = Algebra::for_engine(kind);
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      ElemRng gen(seed * 131);
      const int n_inputs = 6, n_ops = 24;
      std::vector<Elem> in_s, in_t;
      for (int i = 0; i < n_inputs; ++i) {
        in_s.push_back(gen.uniform(alg));
        in_t.push_back(gen.uniform(alg));
      }
      // op tape: (kind, lhs, rhs/scalar)
      struct Op {
        int what, lhs, rhs;
        Elem scalar;
      };
      std::vector<Op> tape;
      int wires = 2 * n_inputs;
      for (int i = 0; i < n_ops; ++i) {
        Op op;
        op.what = int(gen.below(4));
        op.lhs = int(gen.below(wires));
        op.rhs = int(gen.below(wires));
        op.scalar = gen.uniform(alg);
        tape.push_back(op);
        ++wires;
      }
      // cleartext evaluation
      std::vector<Elem> clear;
      for (auto v : in_s) clear.push_back(v);
      for (auto v : in_t) clear.push_back(v);
      for (const auto& op : tape) {
        Elem l = clear[op.lhs], r = clear[op.rhs];
        switch (op.what) {
          case 0: clear.push_back(alg.add(l, r)); break;
          case 1: clear.push_back(alg.sub(l, r)); break;
          case 2: clear.push_back(alg.mul(l, op.scalar)); break;
          default: clear.push_back(alg.mul(l, r)); break;
        }
      }
      Elem want = clear.back();

      auto run_party = [&](Engine& e, bool am_source) {
        auto [mine, theirs] =
            e.input_exchange(am_source ? in_s : in_t, n_inputs);
        std::vector<ShareVec> w;
        const auto& first = am_source ? mine : theirs;
        const auto& second = am_source ? theirs : mine;
        for (int i = 0; i < n_inputs; ++i) w.push_back(slice(first, i, 1));
        for (int i = 0; i < n_inputs; ++i) w.push_back(slice(second, i, 1));
        for (const auto& op : tape) {
          switch (op.what) {
            case 0: w.push_back(e.add(w[op.lhs], w[op.rhs])); break;
            case 1: w.push_back(e.sub(w[op.lhs], w[op.rhs])); break;
            case 2: w.push_back(e.scalar_mul(w[op.lhs], op.scalar)); break;
            default: w.push_back(e.mul(w[op.lhs], w[op.rhs])); break;
          }
        }
        Elem got = e.open(w.back(), OpenTag::DebugProbe)[0];
        e.check();
        CHECK(got == want);
      };
      run_engines(
          kind, ample_material(),
          [&](Engine& e) { run_party(e, true); },
          [&](Engine& e) { run_party(e, false); }, seed);
    }
  }
}

TEST_CASE("metered bytes match the closed-form communication model") {
  // circuit: input exchange (3 self / 2 peer), two mul batches (sizes 3, 2),
  // one open of 3 elements
  for (auto kind : kBoth) {
    bool mal = kind == EngineKind::Malicious;
    run_engines(
        kind, ample_material(),
        [&](Engine& e) {
          auto [mine, theirs] = e.input_exchange(std::vector<Elem>{1, 2, 3}, 2);
          auto m1 = e.mul(mine, mine);
          auto m2 = e.mul(theirs, theirs);
          e.open(m1, OpenTag::DebugProbe);
          e.check();
          std::uint64_t expect = (9 + 8 * 3)          // my input deltas
                                 + (9 + 16 * 3)       // mul batch of 3: eps and rho
                                 + (9 + 16 * 2)       // mul batch of 2
                                 + (9 + 8 * 3);       // open of 3
          if (mal) expect += (9 + 32) + (9 + 32)      // coin commit + reveal
                             + (9 + 32) + (9 + 24);   // sigma commit + reveal
          CHECK(e.channel()->stats().bytes_sent == expect);
          CHECK(e.channel()->stats().bytes_received == expect - 8);  // peer sent 2 inputs
        },
        [&](Engine& e) {
          auto [mine, theirs] = e.input_exchange(std::vector<Elem>{4, 5}, 3);
          auto m1 = e.mul(theirs, theirs);
          auto m2 = e.mul(mine, mine);
          e.open(m1, OpenTag::DebugProbe);
          e.check();
        });
  }
}

TEST_CASE("privacy smoke: transcript distributions match for equal-output inputs") {
  // The source's private input varies while the target's stays fixed and
  // nothing is revealed. Across resampled dealer randomness, the target's
  // received messages (input delta, eps/rho openings, the masked
  // truncation opening) must be statistically indistinguishable.
  for (auto kind : kBoth) {
    FixedCodec codec;
    Algebra alg = Algebra::for_engine(kind);
    const int kRuns = 500;

    // per run: the target's received element stream, fixed layout
    auto collect = [&](double source_x) {
      std::vector<std::vector<double>> slots;
      for (int run = 0; run < kRuns; ++run) {
        TranscriptSink sink;
        sink.capture_payloads = true;
        DealerConfig dc;
        dc.engine = kind;
        dc.counts = ample_material(8, 8, 1, 8);
        for (int b = 0; b < 8; ++b) dc.seed[b] = std::uint8_t((run * 37 + b + 1));
        auto [s0, s1] = deal(dc);
        auto st0 = std::make_shared<PreprocStore>(std::move(s0));
        auto st1 = std::make_shared<PreprocStore>(std::move(s1));
        run_pair(
            [&, st0](Channel& ch) {
              auto e = make_engine(kind, PartyRole::Source, std::move(*st0), &ch,
                                   1000 + run);
              auto x = e->input_self(std::vector<Elem>{codec.encode(source_x, alg)});
              auto y = e->input_peer(1);
              auto z = e->trunc(e->mul(x, y));
              (void)z;  // never opened
              e->check();
            },
            [&, st1](Channel& ch) {
              ch.set_transcript(&sink);
              auto e = make_engine(kind, PartyRole::Target, std::move(*st1), &ch,
                                   2000 + run);
              auto x = e->input_peer(1);
              auto y = e->input_self(std::vector<Elem>{codec.encode(3.0, alg)});
              auto z = e->trunc(e->mul(x, y));
              (void)z;
              e->check();
            });
        std::vector<double> vals;
        for (std::size_t f = 0; f < sink.frames.size(); ++f) {
          if (sink.frames[f].outgoing) continue;
          if (sink.frames[f].type != MsgType::Open &&
              sink.frames[f].type != MsgType::MaskDelta)
            continue;
          for (Elem e2 : Channel::unpack_elems(sink.payloads[f]))
            vals.push_back(double(e2) * 0x1.0p-64);  // map to [0,1)
        }
        if (slots.empty()) slots.resize(vals.size());
        REQUIRE(vals.size() == slots.size());  // identical transcript shape
        for (std::size_t i = 0; i < vals.size(); ++i) slots[i].push_back(vals[i]);
      }
      return slots;
    };

    auto a = collect(2.0);
    auto b = collect(4.0);
    REQUIRE(a.size() == b.size());
    REQUIRE(!a.empty());
    // two-sample Kolmogorov-Smirnov distance per transcript slot
    for (std::size_t slot = 0; slot < a.size(); ++slot) {
      auto sa = a[slot], sb = b[slot];
      std::sort(sa.begin(), sa.end());
      std::sort(sb.begin(), sb.end());
      double ks = 0;
      std::size_t i = 0, j = 0;
      while (i < sa.size() && j < sb.size()) {
        if (sa[i] <= sb[j]) ++i;
        else ++j;
        ks = std::max(ks, std::fabs(double(i) / sa.size() - double(j) / sb.size()));
      }
      // crit value at alpha ~ 1e-3 for n=m=500 is about 0.124
      CHECK(ks < 0.124);
    }
  }
}
