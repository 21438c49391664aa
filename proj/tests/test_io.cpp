/*
 * This code is licensed under the Apache License, Version 2.0. You may
 * obtain a copy of this license at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "ptshadow/fcs.hpp"
#include "ptshadow/gates.hpp"
#include "ptshadow/io.hpp"
#include "ptshadow/mle.hpp"

using namespace ptshadow;

namespace {

struct TempDir {
  std::filesystem::path dir;
  TempDir() {
    dir = std::filesystem::temp_directory_path() / "ptshadow_io_test";
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

Matrix random_density(Rng& rng, Index d) {
  Matrix g(d, d);
  for (Index r = 0; r < d; ++r)
    for (Index c = 0; c < d; ++c)
      g(r, c) = Complex(rng.gaussian(), rng.gaussian());
  Matrix rho = g * g.adjoint();
  return rho / rho.trace();
}

ProcessTensor random_process(Rng& rng, Index k) {
  const Matrix rho_se = kron(random_density(rng, 2), random_density(rng, 2));
  std::vector<Matrix> us;
  for (Index i = 0; i < k; ++i) us.push_back(rng.haar_unitary(4));
  return simulate_process(us, rho_se, 2);
}

}  // namespace

TEST_CASE("process tensor container") {
  TempDir tmp;
  Rng rng(7);
  const ProcessTensor pt = random_process(rng, 2);

  SECTION("binary round trip is exact") {
    io::save_process(tmp.path("pt.bin"), pt);
    const ProcessTensor back = io::load_process(tmp.path("pt.bin"));
    REQUIRE(back.steps == pt.steps);
    REQUIRE(back.local_dim == pt.local_dim);
    REQUIRE((back.choi - pt.choi).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("json round trip is exact") {
    const nlohmann::json j = io::process_to_json(pt);
    REQUIRE(j.at("steps") == 2);
    REQUIRE(j.at("legs").size() == 5);
    const ProcessTensor back = io::process_from_json(j);
    REQUIRE((back.choi - pt.choi).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("wrong container type is rejected") {
    io::save_process(tmp.path("pt.bin"), pt);
    REQUIRE_THROWS_WITH(io::load_mpo(tmp.path("pt.bin")),
                        Catch::Matchers::ContainsSubstring("container"));
  }

  SECTION("missing file is rejected") {
    REQUIRE_THROWS(io::load_process(tmp.path("absent.bin")));
  }
}

TEST_CASE("shadow record files") {
  TempDir tmp;
  const InstrumentFrame frame = pauli_process_frame(2);

  ShadowSet shadow;
  shadow.frame = frame;
  shadow.seed = 99;
  for (std::uint16_t i = 0; i < 5; ++i)
    shadow.snapshots.push_back(
        Snapshot{{i, static_cast<std::uint16_t>(35 - i)},
                 static_cast<std::uint16_t>(i % 6)});

  SECTION("round trip preserves records and seed") {
    io::save_shadow_records(tmp.path("rec.bin"), shadow);
    const ShadowSet back = io::load_shadow_records(tmp.path("rec.bin"), frame);
    REQUIRE(back.seed == 99);
    REQUIRE(back.snapshots.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      REQUIRE(back.snapshots[i].element == shadow.snapshots[i].element);
      REQUIRE(back.snapshots[i].terminal == shadow.snapshots[i].terminal);
    }
  }

  SECTION("empty record file keeps a valid header") {
    ShadowSet empty;
    empty.frame = frame;
    empty.seed = 5;
    io::save_shadow_records(tmp.path("empty.bin"), empty);
    const ShadowSet back = io::load_shadow_records(tmp.path("empty.bin"), frame);
    REQUIRE(back.snapshots.empty());
    REQUIRE(back.seed == 5);
  }

  SECTION("frame mismatch is rejected") {
    io::save_shadow_records(tmp.path("rec.bin"), shadow);
    REQUIRE_THROWS_WITH(
        io::load_shadow_records(tmp.path("rec.bin"), pauli_process_frame(3)),
        Catch::Matchers::ContainsSubstring("match"));
  }

  SECTION("jsonl debug dump has one line per snapshot") {
    io::save_shadow_jsonl(tmp.path("rec.jsonl"), shadow);
    std::ifstream is(tmp.path("rec.jsonl"));
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line)) {
      const auto j = nlohmann::json::parse(line);
      REQUIRE(j.at("e").size() == 2);
      ++lines;
    }
    REQUIRE(lines == 5);
  }
}

TEST_CASE("mpo container") {
  TempDir tmp;
  Rng rng(11);
  const Matrix rho_se = kron(random_density(rng, 2), random_density(rng, 2));
  std::vector<Matrix> us;
  for (int i = 0; i < 3; ++i) us.push_back(gates::exchange(0.3 + 0.2 * i));
  const ProcessTensor pt = simulate_process(us, rho_se, 2);
  const MpoProcess mpo =
      assemble_mpo(build_E(exact_marginals(pt, 2)), 2);

  SECTION("round trip reproduces the reconstruction") {
    io::save_mpo(tmp.path("mpo.bin"), mpo);
    const MpoProcess back = io::load_mpo(tmp.path("mpo.bin"));
    REQUIRE(back.bond_dims == mpo.bond_dims);
    REQUIRE(back.window == 2);
    const ProcessTensor a = reconstruct_dense(mpo);
    const ProcessTensor b = reconstruct_dense(back);
    REQUIRE((a.choi - b.choi).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.junctions.size() == mpo.junctions.size());
    for (std::size_t i = 0; i < back.junctions.size(); ++i)
      REQUIRE(back.junctions[i].rank == mpo.junctions[i].rank);
  }

  SECTION("summary reports shape and conditioning") {
    const nlohmann::json j = io::mpo_summary(mpo);
    REQUIRE(j.at("steps") == 3);
    REQUIRE(j.at("window") == 2);
    REQUIRE(j.at("bond_dims").size() == mpo.bond_dims.size());
    REQUIRE(j.at("junctions").size() == mpo.junctions.size());
    for (const auto& rep : j.at("junctions"))
      REQUIRE(rep.at("smallest").get<double>() > 0.0);
  }
}

TEST_CASE("frame manifest and fit log") {
  SECTION("manifest carries per-slot conditioning") {
    const InstrumentFrame frame = pauli_process_frame(2);
    const nlohmann::json j = io::frame_manifest(frame);
    REQUIRE(j.at("id").get<std::string>() == frame.id);
    REQUIRE(j.at("steps").size() == 2);
    for (const auto& s : j.at("steps")) {
      REQUIRE(s.at("elements") == 36);
      REQUIRE(s.at("rank") == 16);
      REQUIRE(s.at("smallest_sv").get<double>() > 0.0);
    }
    REQUIRE(j.at("terminal_effects") == 6);
  }

  SECTION("fit log carries the iteration trace") {
    MleResult res;
    res.converged = true;
    res.log_likelihood = -3.5;
    res.trace.push_back({0, -4.0, 0.5});
    res.trace.push_back({1, -3.5, 0.25});
    const nlohmann::json j = io::fit_log(res);
    REQUIRE(j.at("converged") == true);
    REQUIRE(j.at("trace").size() == 2);
    REQUIRE(j.at("trace")[1].at("f").get<double>() == -3.5);
  }
}

TEST_CASE("checksums") {
  TempDir tmp;

  SECTION("fnv1a matches known vectors") {
    REQUIRE(io::fnv1a(std::string("")) == 0xcbf29ce484222325ull);
    REQUIRE(io::fnv1a(std::string("a")) == 0xaf63dc4c8601ec8cull);
    REQUIRE(io::hex64(0xaf63dc4c8601ec8cull) == "af63dc4c8601ec8c");
  }

  SECTION("file checksum is content addressed") {
    {
      std::ofstream(tmp.path("a.txt")) << "hello";
      std::ofstream(tmp.path("b.txt")) << "hello";
      std::ofstream(tmp.path("c.txt")) << "hellp";
    }
    REQUIRE(io::checksum_file(tmp.path("a.txt")) ==
            io::checksum_file(tmp.path("b.txt")));
    REQUIRE(io::checksum_file(tmp.path("a.txt")) !=
            io::checksum_file(tmp.path("c.txt")));
    REQUIRE(io::checksum_file(tmp.path("a.txt")) ==
            io::fnv1a(std::string("hello")));
  }

  SECTION("identical saves produce identical checksums") {
    Rng rng(3);
    const ProcessTensor pt = random_process(rng, 1);
    io::save_process(tmp.path("p1.bin"), pt);
    io::save_process(tmp.path("p2.bin"), pt);
    REQUIRE(io::checksum_file(tmp.path("p1.bin")) ==
            io::checksum_file(tmp.path("p2.bin")));
  }
}
