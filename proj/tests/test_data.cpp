// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "pfpl/data.hpp"
#include "pfpl/errors.hpp"
#include "temp_dir.hpp"

using namespace pfpl;
namespace fs = std::filesystem;

namespace {

using testing::TempDir;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void write_bytes(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x00000803);
  put_u32(b, count);
  put_u32(b, 2);
  put_u32(b, 2);
  b.insert(b.end(), pixels.begin(), pixels.end());
  return b;
}

std::vector<std::uint8_t> idx_labels(const std::vector<std::uint8_t>& labels) {
  std::vector<std::uint8_t> b;
  put_u32(b, 0x00000801);
  put_u32(b, static_cast<std::uint32_t>(labels.size()));
  b.insert(b.end(), labels.begin(), labels.end());
  return b;
}

std::map<DomainId, LabeledData> default_pool(std::uint64_t seed) {
  const DomainShift shift;
  std::map<DomainId, LabeledData> pool;
  for (const auto& spec : default_domains(2, 16, shift, seed))
    pool.emplace(spec.id, make_synthetic_domain(spec, 6, seed, 250, 0.3));
  return pool;
}

std::set<std::uint64_t> ids_of(const LabeledData& d) { return {d.sample_ids.begin(), d.sample_ids.end()}; }

}  // namespace

TEST_CASE("identity transform without noise reproduces the class mean") {
  const auto spec = DomainSpec::identity(0, 6);
  const auto data = make_synthetic_domain(spec, 3, 42, 5);
  CHECK(data.size() == 15);
  for (std::size_t r = 0; r < data.size(); ++r) {
    const auto first = static_cast<Eigen::Index>(r - r % 5);
    CHECK(data.inputs.row(static_cast<Eigen::Index>(r)) == data.inputs.row(first));
    CHECK(data.labels[r] == static_cast<Label>(r / 5));
  }
  CHECK(data.inputs.row(0) != data.inputs.row(5));
}

TEST_CASE("rotation by pi negates the class means") {
  const auto d0 = make_synthetic_domain(DomainSpec::identity(0, 4), 3, 9, 2);
  auto flipped = DomainSpec::identity(1, 4);
  flipped.rotation = std::acos(-1.0);
  const auto d1 = make_synthetic_domain(flipped, 3, 9, 2);
  CHECK((d0.inputs + d1.inputs).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(d1.domains.front() == 1);
  CHECK(d1.sample_ids.front() == (std::uint64_t{1} << 32));
}

TEST_CASE("synthetic generation is deterministic") {
  const DomainShift shift;
  const auto specs = default_domains(2, 16, shift, 5);
  const auto a = make_synthetic_domain(specs[1], 6, 5, 20, 0.3);
  const auto b = make_synthetic_domain(specs[1], 6, 5, 20, 0.3);
  CHECK(a.inputs == b.inputs);
  CHECK(a.sample_ids == b.sample_ids);
  CHECK(specs[1].rotation == doctest::Approx(std::acos(-1.0)));
  CHECK_THROWS_AS(make_synthetic_domain(specs[0], 1, 5, 20), ConfigError);
  auto bad = specs[0];
  bad.scale(3) = 0.0;
  CHECK_THROWS_AS(make_synthetic_domain(bad, 3, 5, 20), ConfigError);
}

TEST_CASE("IDX fixture decodes to exact pixel values") {
  TempDir dir;
  const std::vector<std::uint8_t> pixels{0, 255, 51, 102, 204, 0, 255, 153};
  write_bytes(dir.path / "img", idx_images(2, pixels));
  write_bytes(dir.path / "lbl", idx_labels({3, 7}));
  const auto data = load_idx(dir.path / "img", dir.path / "lbl", 2);
  REQUIRE(data.size() == 2);
  CHECK(data.feature_dim() == 4);
  for (std::size_t i = 0; i < pixels.size(); ++i)
    CHECK(data.inputs(static_cast<Eigen::Index>(i / 4), static_cast<Eigen::Index>(i % 4)) ==
          static_cast<double>(pixels[i]) / 255.0);
  CHECK(data.labels == std::vector<Label>{3, 7});
  CHECK(data.domains == std::vector<DomainId>{2, 2});
}

TEST_CASE("IDX errors name the offending file") {
  TempDir dir;
  const std::vector<std::uint8_t> pixels{0, 255, 51, 102, 204, 0, 255, 153};
  write_bytes(dir.path / "img", idx_images(2, pixels));
  write_bytes(dir.path / "lbl", idx_labels({3, 7}));

  write_bytes(dir.path / "empty", {});
  try {
    load_idx(dir.path / "empty", dir.path / "lbl");
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(e.path() == (dir.path / "empty").string());
  }

  write_bytes(dir.path / "lbl3", idx_labels({3, 7, 1}));
  CHECK_THROWS_AS(load_idx(dir.path / "img", dir.path / "lbl3"), IngestionError);

  auto magic = idx_images(2, pixels);
  magic[3] = 0x02;
  write_bytes(dir.path / "magic", magic);
  try {
    load_idx(dir.path / "magic", dir.path / "lbl");
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(e.path() == (dir.path / "magic").string());
  }

  auto truncated = idx_images(2, pixels);
  truncated.pop_back();
  write_bytes(dir.path / "short", truncated);
  try {
    load_idx(dir.path / "short", dir.path / "lbl");
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    CHECK(e.path() == (dir.path / "short").string());
  }
}

TEST_CASE("CSV ingestion") {
  TempDir dir;
  {
    std::ofstream out(dir.path / "ok.csv");
    out << "f0,f1,label,domain\n0.5,-1,2,0\n3,4.25,0,1\n";
  }
  const auto data = load_csv(dir.path / "ok.csv");
  REQUIRE(data.size() == 2);
  CHECK(data.inputs(1, 1) == 4.25);
  CHECK(data.labels == std::vector<Label>{2, 0});
  CHECK(data.domains == std::vector<DomainId>{0, 1});
  CHECK(data.sample_ids[0] != data.sample_ids[1]);

  {
    std::ofstream out(dir.path / "bad.csv");
    out << "f0,f1,label,domain\n0.5,2,0\n";
  }
  CHECK_THROWS_AS(load_csv(dir.path / "bad.csv"), IngestionError);
  {
    std::ofstream out(dir.path / "header.csv");
    out << "x,y,label,domain\n0.5,1,2,0\n";
  }
  CHECK_THROWS_AS(load_csv(dir.path / "header.csv"), IngestionError);
  CHECK_THROWS_AS(load_csv(dir.path / "missing.csv"), IngestionError);
}

TEST_CASE("single client holding every class receives a split of its domain") {
  std::map<DomainId, LabeledData> pool;
  pool.emplace(0, make_synthetic_domain(DomainSpec::identity(0, 4), 3, 1, 10));
  PartitionPlan plan;
  plan.clients.push_back({0, {0, 1, 2}, 10, {0}});
  const auto clients = partition(pool, plan);
  REQUIRE(clients.size() == 1);
  auto all = ids_of(clients[0].train);
  const auto test = ids_of(clients[0].test);
  all.insert(test.begin(), test.end());
  CHECK(all == ids_of(pool.at(0)));
  CHECK(clients[0].train.size() == 24);
  CHECK(clients[0].test.size() == 6);
}

TEST_CASE("disjoint class plans give disjoint class sets") {
  const auto pool = default_pool(3);
  PartitionPlan plan;
  plan.clients.push_back({0, {0, 1, 2}, 20, {0}});
  plan.clients.push_back({1, {3, 4, 5}, 20, {0}});
  const auto clients = partition(pool, plan);
  CHECK(clients[0].classes_present() == std::set<Label>{0, 1, 2});
  CHECK(clients[1].classes_present() == std::set<Label>{3, 4, 5});
}

TEST_CASE("default plan: exhaustive scan of the emitted partition") {
  const std::uint64_t seed = 1;
  const PlanSpec spec;  // 8 clients, 6 classes, n = 3, k = 50, 2 domains
  const auto plan = draw_plan(spec, seed);
  REQUIRE(plan.clients.size() == 8);
  const auto clients = partition(default_pool(seed), plan);
  REQUIRE(clients.size() == 8);

  std::set<std::uint64_t> seen;
  std::set<DomainId> domains_used;
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& c = clients[i];
    const auto& a = plan.clients[i];
    CHECK(c.id == a.id);
    CHECK(a.classes.size() == 3);
    CHECK(c.classes_present().size() == 3);
    CHECK(c.classes_present() == std::set<Label>(a.classes.begin(), a.classes.end()));
    for (const auto& [label, count] : c.per_class_counts) CHECK(count == 40);

    std::map<Label, std::size_t> train_counts, test_counts;
    for (Label y : c.train.labels) ++train_counts[y];
    for (Label y : c.test.labels) ++test_counts[y];
    for (Label y : a.classes) {
      CHECK(train_counts[y] == 40);
      CHECK(test_counts[y] == 10);
    }
    const std::set<DomainId> planned(a.domains.begin(), a.domains.end());
    CHECK(c.domains_present() == planned);
    CHECK(std::set<DomainId>(c.test.domains.begin(), c.test.domains.end()) == planned);
    domains_used.insert(planned.begin(), planned.end());

    for (const auto* part : {&c.train, &c.test})
      for (auto id : part->sample_ids) CHECK(seen.insert(id).second);
  }
  CHECK(domains_used == std::set<DomainId>{0, 1});
}

TEST_CASE("partitioning is deterministic") {
  const PlanSpec spec;
  const auto a = partition(default_pool(4), draw_plan(spec, 4));
  const auto b = partition(default_pool(4), draw_plan(spec, 4));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].train.sample_ids == b[i].train.sample_ids);
    CHECK(a[i].test.sample_ids == b[i].test.sample_ids);
  }
  const auto c = partition(default_pool(4), draw_plan(spec, 5));
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].train.sample_ids != c[i].train.sample_ids;
  CHECK(differs);
}

TEST_CASE("variable n and k are drawn from the configured ranges") {
  PlanSpec spec;
  spec.n_choices = {3, 4, 5};
  spec.k_min = 20;
  spec.k_max = 40;
  spec.num_clients = 20;
  const auto plan = draw_plan(spec, 8);
  std::set<std::size_t> ns;
  for (const auto& a : plan.clients) {
    ns.insert(a.classes.size());
    CHECK(a.k_shot >= 20);
    CHECK(a.k_shot <= 40);
    CHECK(std::set<Label>(a.classes.begin(), a.classes.end()).size() == a.classes.size());
  }
  CHECK(ns.size() > 1);
}

TEST_CASE("short pools raise a partition error naming class and domain") {
  std::map<DomainId, LabeledData> pool;
  pool.emplace(0, make_synthetic_domain(DomainSpec::identity(0, 4), 3, 1, 10));
  PartitionPlan plan;
  plan.clients.push_back({0, {1}, 8, {0}});
  plan.clients.push_back({1, {1}, 8, {0}});
  try {
    partition(pool, plan);
    FAIL("expected PartitionError");
  } catch (const PartitionError& e) {
    const std::string what = e.what();
    CHECK(what.find("class 1") != std::string::npos);
    CHECK(what.find("domain 0") != std::string::npos);
    CHECK(what.find("6") != std::string::npos);
  }
}

TEST_CASE("feature skew: same class on different domains is separated by more than 5 standard errors") {
  const std::uint64_t seed = 1;
  const auto plan = draw_plan(PlanSpec{}, seed);
  const auto clients = partition(default_pool(seed), plan);
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < clients.size(); ++a)
    for (std::size_t b = a + 1; b < clients.size(); ++b) {
      if (clients[a].domains_present() == clients[b].domains_present()) continue;
      for (Label y : clients[a].classes_present()) {
        if (!clients[b].classes_present().contains(y)) continue;
        auto stats = [&](const LabeledData& d) {
          std::vector<Eigen::Index> rows;
          for (std::size_t r = 0; r < d.size(); ++r)
            if (d.labels[r] == y) rows.push_back(static_cast<Eigen::Index>(r));
          const auto n = static_cast<double>(rows.size());
          Vector mean = Vector::Zero(d.inputs.cols());
          for (auto r : rows) mean += d.inputs.row(r).transpose();
          mean /= n;
          double var_sum = 0.0;  // trace of the sample covariance
          for (auto r : rows) var_sum += (d.inputs.row(r).transpose() - mean).squaredNorm();
          var_sum /= n - 1.0;
          return std::pair{mean, var_sum / n};
        };
        const auto [ma, va] = stats(clients[a].train);
        const auto [mb, vb] = stats(clients[b].train);
        const double se = std::sqrt(va + vb);
        CHECK((ma - mb).norm() > 5.0 * se);
        ++pairs;
      }
    }
  CHECK(pairs > 0);
}

TEST_CASE("LabeledData::select keeps rows aligned") {
  const auto data = make_synthetic_domain(DomainSpec::identity(3, 2), 2, 1, 3);
  const std::vector<std::size_t> rows{4, 1};
  const auto sub = data.select(rows);
  CHECK(sub.labels == std::vector<Label>{1, 0});
  CHECK(sub.sample_ids == std::vector<std::uint64_t>{data.sample_ids[4], data.sample_ids[1]});
  CHECK(sub.inputs.row(0) == data.inputs.row(4));
  const auto batch = data.batch(rows);
  CHECK(batch.inputs == sub.inputs);
}
