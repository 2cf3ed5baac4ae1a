// Copyright 2026 The PFPL Authors
// SPDX-License-Identifier: Apache-2.0

// IDX and CSV ingestion.

#include <array>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "pfpl/data.hpp"
#include "pfpl/errors.hpp"

namespace pfpl {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError(path.string(), "cannot open file");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::filesystem::path& path) {
  if (offset + 4 > bytes.size()) throw IngestionError(path.string(), "truncated header");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

LabeledData load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                     DomainId domain) {
  const auto image_bytes = read_all(images);
  const auto label_bytes = read_all(labels);
  if (image_bytes.empty()) throw IngestionError(images.string(), "empty file");
  if (label_bytes.empty()) throw IngestionError(labels.string(), "empty file");

  const std::uint32_t image_magic = read_be32(image_bytes, 0, images);
  if (image_magic != kImageMagic)
    throw IngestionError(images.string(), fmt::format("bad magic 0x{:08x}, expected 0x{:08x}",
                                                      image_magic, kImageMagic));
  const std::uint32_t label_magic = read_be32(label_bytes, 0, labels);
  if (label_magic != kLabelMagic)
    throw IngestionError(labels.string(), fmt::format("bad magic 0x{:08x}, expected 0x{:08x}",
                                                      label_magic, kLabelMagic));

  const std::size_t count = read_be32(image_bytes, 4, images);
  const std::size_t rows = read_be32(image_bytes, 8, images);
  const std::size_t cols = read_be32(image_bytes, 12, images);
  const std::size_t label_count = read_be32(label_bytes, 4, labels);
  if (count != label_count)
    throw IngestionError(labels.string(), fmt::format("{} labels for {} images in {}",
                                                      label_count, count, images.string()));
  const std::size_t pixels = rows * cols;
  if (image_bytes.size() < 16 + count * pixels)
    throw IngestionError(images.string(), fmt::format("truncated: expected {} bytes, found {}",
                                                      16 + count * pixels, image_bytes.size()));
  if (label_bytes.size() < 8 + count)
    throw IngestionError(labels.string(), fmt::format("truncated: expected {} bytes, found {}",
                                                      8 + count, label_bytes.size()));

  LabeledData data;
  data.inputs.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(pixels));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < pixels; ++j)
      data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          image_bytes[16 + i * pixels + j] / 255.0;
    data.labels.push_back(static_cast<Label>(label_bytes[8 + i]));
    data.domains.push_back(domain);
    data.sample_ids.push_back((static_cast<std::uint64_t>(static_cast<std::uint32_t>(domain))
                               << 32) |
                              i);
  }
  return data;
}

LabeledData load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path.string(), "cannot open file");

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      cells.push_back(cell);
    }
    return cells;
  };

  std::string line;
  if (!std::getline(in, line)) throw IngestionError(path.string(), "empty file");
  const auto header = split(line);
  if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "domain")
    throw IngestionError(path.string(), "header must be f0,...,f{p-1},label,domain");
  const std::size_t dim = header.size() - 2;
  for (std::size_t j = 0; j < dim; ++j)
    if (header[j] != fmt::format("f{}", j))
      throw IngestionError(path.string(), fmt::format("header column {} should be f{}", j, j));

  std::vector<std::vector<double>> rows;
  LabeledData data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != dim + 2)
      throw IngestionError(path.string(), fmt::format("line {}: expected {} fields, found {}",
                                                      line_no, dim + 2, cells.size()));
    std::vector<double> values(dim);
    for (std::size_t j = 0; j < dim; ++j) {
      const auto& c = cells[j];
      auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), values[j]);
      if (ec != std::errc() || ptr != c.data() + c.size())
        throw IngestionError(path.string(), fmt::format("line {}: bad number '{}'", line_no, c));
    }
    long label = 0, domain = 0;
    for (auto [cell, out] : std::array{std::pair{&cells[dim], &label},
                                       std::pair{&cells[dim + 1], &domain}}) {
      auto [ptr, ec] = std::from_chars(cell->data(), cell->data() + cell->size(), *out);
      if (ec != std::errc() || ptr != cell->data() + cell->size() || *out < 0)
        throw IngestionError(path.string(),
                             fmt::format("line {}: bad integer '{}'", line_no, *cell));
    }
    rows.push_back(std::move(values));
    data.labels.push_back(static_cast<Label>(label));
    data.domains.push_back(static_cast<DomainId>(domain));
    data.sample_ids.push_back(rows.size() - 1);
  }
  data.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < dim; ++j)
      data.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return data;
}

}  // namespace pfpl
