#pragma once

// Reliability block diagrams: steady-state availability of components and
// of placed SFCs, as series/parallel expression trees.

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sfcrl/core.hpp"
#include "sfcrl/errors.hpp"

namespace sfcrl::rbd {

inline double steady_state_availability(double mttf, double mttr) {
  if (!(mttf > 0.0)) throw DomainError("mttf must be positive");
  if (!(mttr >= 0.0)) throw DomainError("mttr must be non-negative");
  return mttf / (mttf + mttr);
}

class Block {
 public:
  enum class Kind { kLeaf, kSeries, kParallel };

  static Block leaf(double availability, std::string label = {}) {
    if (!(availability >= 0.0 && availability <= 1.0)) {
      throw DomainError("leaf availability outside [0, 1]");
    }
    Block b(Kind::kLeaf);
    b.value_ = availability;
    b.label_ = std::move(label);
    return b;
  }
  static Block series(std::vector<Block> children) {
    return composite(Kind::kSeries, std::move(children));
  }
  static Block parallel(std::vector<Block> children) {
    return composite(Kind::kParallel, std::move(children));
  }

  Kind kind() const { return kind_; }
  double value() const { return value_; }
  const std::string& label() const { return label_; }
  const std::vector<Block>& children() const { return children_; }

  void add_child(Block child) {
    if (kind_ == Kind::kLeaf) throw UsageError("leaf has no children");
    children_.push_back(std::move(child));
  }

  std::size_t leaf_count() const {
    if (kind_ == Kind::kLeaf) return 1;
    std::size_t n = 0;
    for (const auto& c : children_) n += c.leaf_count();
    return n;
  }

 private:
  explicit Block(Kind k) : kind_(k) {}
  static Block composite(Kind k, std::vector<Block> children) {
    if (children.empty()) {
      throw UsageError("series/parallel block needs at least one child");
    }
    Block b(k);
    b.children_ = std::move(children);
    return b;
  }

  Kind kind_;
  double value_ = 0.0;
  std::string label_;
  std::vector<Block> children_;
};

inline double evaluate(const Block& block) {
  switch (block.kind()) {
    case Block::Kind::kLeaf:
      return block.value();
    case Block::Kind::kSeries: {
      double a = 1.0;
      for (const auto& c : block.children()) a *= evaluate(c);
      return a;
    }
    case Block::Kind::kParallel: {
      double u = 1.0;
      for (const auto& c : block.children()) u *= 1.0 - evaluate(c);
      return 1.0 - u;
    }
  }
  return 0.0;
}

// Series of one leaf per distinct server (first-use order) and one
// parallel block of Q VNF leaves per chain position.
inline Block sfc_rbd(const Placement& placement,
                     const std::vector<ServerRuntime>& servers,
                     double vnf_availability) {
  if (!placement.complete || placement.assignments.empty()) {
    throw UsageError("sfc_rbd: placement is not complete");
  }
  std::vector<Block> parts;
  std::vector<ServerId> seen;
  std::size_t pos = 0;
  for (const auto& a : placement.assignments) {
    if (a.server >= servers.size()) throw UsageError("sfc_rbd: bad server id");
    if (a.redundancy < 1) throw UsageError("sfc_rbd: redundancy < 1");
    if (std::find(seen.begin(), seen.end(), a.server) == seen.end()) {
      seen.push_back(a.server);
      const auto& spec = servers[a.server].spec();
      parts.push_back(Block::leaf(
          steady_state_availability(spec.mttf, spec.mttr),
          "server " + std::to_string(a.server)));
    }
    std::vector<Block> replicas;
    for (int q = 0; q < a.redundancy; ++q) {
      replicas.push_back(
          Block::leaf(vnf_availability, "vnf " + std::to_string(pos)));
    }
    parts.push_back(Block::parallel(std::move(replicas)));
    ++pos;
  }
  return Block::series(std::move(parts));
}

inline double sfc_availability(const Placement& placement,
                               const std::vector<ServerRuntime>& servers,
                               double vnf_availability) {
  return evaluate(sfc_rbd(placement, servers, vnf_availability));
}

inline void print(std::ostream& os, const Block& b, int depth = 0) {
  const std::string pad(static_cast<std::size_t>(depth) * 2, ' ');
  switch (b.kind()) {
    case Block::Kind::kLeaf:
      os << pad << "leaf " << (b.label().empty() ? "" : b.label() + " ")
         << "A=" << b.value() << '\n';
      return;
    case Block::Kind::kSeries:
      os << pad << "series A=" << evaluate(b) << '\n';
      break;
    case Block::Kind::kParallel:
      os << pad << "parallel A=" << evaluate(b) << '\n';
      break;
  }
  for (const auto& c : b.children()) print(os, c, depth + 1);
}

inline std::string to_string(const Block& b) {
  std::ostringstream os;
  os.precision(12);
  print(os, b);
  return os.str();
}

}  // namespace sfcrl::rbd
