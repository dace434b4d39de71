#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace coalinla {

// Ages are measured backward in time from the most recent sample, which sits at 0.
struct GenealogyNode {
  std::optional<std::string> label;
  double age = 0.0;
  std::optional<std::size_t> parent;
  std::vector<std::size_t> children;  // empty for tips, exactly two otherwise

  bool is_tip() const { return children.empty(); }
};

// Rooted binary tree with node ages. Construct through `Genealogy::from_nodes`,
// `parse_newick` or the simulator so the structural invariants always hold.
class Genealogy {
 public:
  // Validates binary structure, connectivity, strict parent/child age ordering
  // and that the youngest tip has age 0. Throws std::invalid_argument.
  static Genealogy from_nodes(std::vector<GenealogyNode> nodes);

  const std::vector<GenealogyNode>& nodes() const { return nodes_; }
  const GenealogyNode& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t root() const { return root_; }
  std::size_t n_tips() const { return n_tips_; }
  double height() const { return nodes_[root_].age; }

  // Tip indices in the order they appear in `nodes()`.
  std::vector<std::size_t> tips() const;

 private:
  std::vector<GenealogyNode> nodes_;
  std::size_t root_ = 0;
  std::size_t n_tips_ = 0;
};

// Thrown by the Newick reader; `position()` is the byte offset of the problem.
class NewickError : public std::runtime_error {
 public:
  NewickError(const std::string& what, std::size_t position);
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

// Tip ages below this are snapped to exactly zero after parsing.
inline constexpr double kTipSnapTolerance = 1e-8;

Genealogy parse_newick(std::string_view text);

// Branch lengths are written with the shortest decimal form that reads back
// to the same double, so parse(serialize(g)) reproduces ages to rounding.
std::string serialize_newick(const Genealogy& g);

// Observation vector of the coalescent likelihood.
struct CoalescentData {
  std::vector<double> coal_ages;    // strictly increasing, n - 1 entries
  std::vector<double> sample_ages;  // sorted ascending, n entries
  std::size_t n = 0;

  bool isochronous() const;
  // k(t) = #{samples with age <= t} - #{coalescences with age <= t}
  int lineages_at(double t) const;
};

// Throws std::invalid_argument on duplicate coalescent ages or when the
// lineage count drops to zero before the root.
CoalescentData extract_coalescent_data(const Genealogy& g);

// Checks the invariants of a hand-built CoalescentData (sizes, ordering,
// lineage counts). Throws std::invalid_argument.
void validate(const CoalescentData& d);

// Sorts its inputs and validates.
CoalescentData make_coalescent_data(std::vector<double> coal_ages, std::vector<double> sample_ages);

}  // namespace coalinla
