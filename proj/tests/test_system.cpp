#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "thzlab/system.hpp"

using namespace thzlab;

TEST_CASE("subcarrier frequencies match the closed form") {
  SystemConfig cfg;
  cfg.carrier_freq_hz = 300e9;
  cfg.bandwidth_hz = 15e9;
  cfg.num_subcarriers = 128;
  CHECK(subcarrier_frequency(cfg, 1) == doctest::Approx(292.55859375e9).epsilon(1e-12));
  CHECK(subcarrier_frequency(cfg, 128) ==
        doctest::Approx(307.44140625e9).epsilon(1e-12));

  SystemConfig odd = cfg;
  odd.num_subcarriers = 129;
  CHECK(subcarrier_frequency(odd, 65) == doctest::Approx(300e9).epsilon(1e-15));
}

TEST_CASE("subcarrier grid is uniform and centered on the carrier") {
  for (int m_count : {16, 127, 128}) {
    SystemConfig cfg;
    cfg.num_subcarriers = m_count;
    double sum = 0.0;
    for (int m = 1; m <= m_count; ++m) sum += subcarrier_frequency(cfg, m);
    CHECK(sum / m_count == doctest::Approx(cfg.carrier_freq_hz).epsilon(1e-12));
    const double step = cfg.bandwidth_hz / m_count;
    for (int m = 1; m < m_count; ++m)
      CHECK(subcarrier_frequency(cfg, m + 1) - subcarrier_frequency(cfg, m) ==
            doctest::Approx(step).epsilon(1e-9));
  }
}

TEST_CASE("subcarrier index is range checked") {
  SystemConfig cfg;
  CHECK_THROWS_AS(subcarrier_frequency(cfg, 0), std::domain_error);
  CHECK_THROWS_AS(subcarrier_frequency(cfg, cfg.num_subcarriers + 1),
                  std::domain_error);
}

TEST_CASE("config invariants are enforced") {
  SystemConfig cfg = desk_profile();
  CHECK_NOTHROW(cfg.validate());

  SystemConfig bad = cfg;
  bad.num_rf_chains = bad.num_tx_antennas;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.grid_size = bad.num_tx_antennas - 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = cfg;
  bad.bandwidth_hz = bad.carrier_freq_hz;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("noise variance follows the SNR convention") {
  SystemConfig cfg;
  cfg.snr_db = 10.0;
  CHECK(cfg.noise_variance_for(2.0) == doctest::Approx(0.2));
  cfg.snr_db = 0.0;
  CHECK(cfg.noise_variance_for(3.5) == doctest::Approx(3.5));
}

TEST_CASE("rng streams are deterministic and independent") {
  Rng a(0), b(0);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(0), d(1);
  int equal = 0;
  for (int i = 0; i < 1000; ++i) equal += (c.next_u64() == d.next_u64());
  CHECK(equal == 0);

  // named children differ from each other and from the parent
  Rng root(42);
  Rng ch_a = root.child("channel");
  Rng ch_b = root.child("noise");
  CHECK(ch_a.next_u64() != ch_b.next_u64());
  Rng idx0 = root.child("trial", 0);
  Rng idx1 = root.child("trial", 1);
  CHECK(idx0.next_u64() != idx1.next_u64());

  // children derive from the key, not the parent's draw position
  Rng r1(9), r2(9);
  (void)r1.next_u64();
  CHECK(r1.child("x").next_u64() == r2.child("x").next_u64());

  // no cross-talk between sibling streams over a longer horizon
  Rng s1 = root.child("a"), s2 = root.child("b");
  int collisions = 0;
  for (int i = 0; i < 1000; ++i) collisions += (s1.next_u64() == s2.next_u64());
  CHECK(collisions == 0);
}

TEST_CASE("rng state round-trips exactly") {
  Rng a(123);
  for (int i = 0; i < 17; ++i) (void)a.next_u64();
  (void)a.normal();
  const std::string state = a.serialize_state();
  Rng b = Rng::deserialize_state(state);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(a.normal() == b.normal());
}

TEST_CASE("config file loads with defaults and overrides") {
  const char* path = "test_config_tmp.json";
  {
    std::ofstream out(path);
    out << R"({"num_tx_antennas": 64, "grid_size": 320, "num_rf_chains": 8,
               "snr_db": 5.0, "seed": 77})";
  }
  SystemConfig cfg = load_config_file(path);
  CHECK(cfg.num_tx_antennas == 64);
  CHECK(cfg.grid_size == 320);
  CHECK(cfg.snr_db == 5.0);
  CHECK(cfg.seed == 77);
  // untouched fields keep the full-scale defaults
  CHECK(cfg.carrier_freq_hz == 300e9);
  CHECK(cfg.num_subcarriers == 128);
  CHECK(cfg.num_paths == 5);
  std::remove(path);

  {
    std::ofstream out(path);
    out << R"({"no_such_field": 1})";
  }
  CHECK_THROWS_AS(load_config_file(path), std::invalid_argument);
  std::remove(path);

  CHECK_THROWS_AS(load_config_file("does_not_exist.json"), std::runtime_error);
}

TEST_CASE("config json round-trip") {
  SystemConfig cfg = desk_profile();
  cfg.seed = 1234;
  SystemConfig other;  // paper defaults
  apply_json_overrides(other, config_to_json(cfg));
  CHECK(other.num_tx_antennas == cfg.num_tx_antennas);
  CHECK(other.grid_size == cfg.grid_size);
  CHECK(other.num_users == cfg.num_users);
  CHECK(other.seed == cfg.seed);
}
