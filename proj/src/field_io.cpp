#include "svda/field_io.hpp"

#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "svda/binary_io.hpp"
#include "svda/csv.hpp"
#include "svda/errors.hpp"

namespace svda::io {

namespace {

constexpr char kMagic[5] = "SVDA";
constexpr std::uint32_t kVersion = 1;

}  // namespace

void write_field_csv(std::ostream& os, const fem::Mesh& mesh, const fem::NodalField& field) {
  if (field.size() != mesh.node_count()) {
    throw Error(ErrorKind::DimensionMismatch, "field does not live on this mesh");
  }
  os << "node,x,y,value\n";
  for (int i = 0; i < mesh.node_count(); ++i) {
    os << i << ',' << csv::format(mesh.nodes[static_cast<std::size_t>(i)].x()) << ','
       << csv::format(mesh.nodes[static_cast<std::size_t>(i)].y()) << ',' << csv::format(field[i])
       << '\n';
  }
  if (!os) throw Error(ErrorKind::Io, "failed to write field CSV");
}

fem::NodalField read_field_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || csv::trim(line) != "node,x,y,value") {
    throw Error(ErrorKind::Io, "field CSV must start with the header node,x,y,value");
  }
  std::vector<double> values;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (csv::trim(line).empty()) continue;
    const auto cells = csv::split(line);
    if (cells.size() != 4) {
      throw Error(ErrorKind::Io, "line " + std::to_string(lineno) + ": expected 4 columns");
    }
    if (static_cast<std::size_t>(csv::parse_double(cells[0])) != values.size()) {
      throw Error(ErrorKind::Io, "line " + std::to_string(lineno) + ": node indices out of order");
    }
    values.push_back(csv::parse_double(cells[3]));
  }
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void write_fields_binary(std::ostream& os, const std::vector<fem::NodalField>& records) {
  if (records.empty()) throw Error(ErrorKind::DimensionMismatch, "nothing to write");
  const auto n = static_cast<std::uint64_t>(records.front().size());
  bin::write_magic(os, kMagic);
  bin::write<std::uint32_t>(os, kVersion);
  bin::write<std::uint64_t>(os, n);
  bin::write<std::uint64_t>(os, records.size() - 1);
  for (const auto& r : records) {
    if (static_cast<std::uint64_t>(r.size()) != n) {
      throw Error(ErrorKind::DimensionMismatch, "records differ in length");
    }
    for (Eigen::Index i = 0; i < r.size(); ++i) bin::write<double>(os, r[i]);
  }
  if (!os) throw Error(ErrorKind::Io, "failed to write binary fields");
}

std::vector<fem::NodalField> read_fields_binary(std::istream& is) {
  bin::expect_magic(is, kMagic);
  if (bin::read<std::uint32_t>(is) != kVersion) throw Error(ErrorKind::Io, "unsupported field file version");
  const auto n = bin::read<std::uint64_t>(is);
  const auto K = bin::read<std::uint64_t>(is);
  constexpr auto kMax = static_cast<std::uint64_t>(std::numeric_limits<int>::max());
  if (n > kMax || K >= kMax) throw Error(ErrorKind::Io, "field file header is corrupt");
  std::vector<fem::NodalField> records(static_cast<std::size_t>(K + 1));
  for (auto& r : records) {
    r.resize(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = bin::read<double>(is);
  }
  return records;
}

void write_basis_binary(std::ostream& os, const Eigen::MatrixXd& basis) {
  std::vector<fem::NodalField> records;
  for (Eigen::Index j = 0; j < basis.cols(); ++j) records.emplace_back(basis.col(j));
  write_fields_binary(os, records);
}

Eigen::MatrixXd read_basis_binary(std::istream& is) {
  const auto records = read_fields_binary(is);
  Eigen::MatrixXd basis(records.front().size(), static_cast<Eigen::Index>(records.size()));
  for (std::size_t j = 0; j < records.size(); ++j) basis.col(static_cast<Eigen::Index>(j)) = records[j];
  return basis;
}

}  // namespace svda::io
