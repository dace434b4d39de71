#include "coalinla/genealogy.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>
#include <system_error>
#include <utility>

namespace coalinla {

namespace {

constexpr double kEdgeTolerance = 1e-12;

bool is_label_char(char c) {
  switch (c) {
    case '(': case ')': case ',': case ':': case ';': case '[': case ']': case '\'':
      return false;
    default:
      return !std::isspace(static_cast<unsigned char>(c));
  }
}

class NewickParser {
 public:
  explicit NewickParser(std::string_view input) : input_(input) {}

  Genealogy parse() {
    skip_blank();
    if (peek() != '(') {
      if (at_end()) fail("empty input");
      fail("a genealogy needs at least two tips; expected '('");
    }
    const std::size_t root = parse_subtree(/*is_root=*/true);
    skip_blank();
    if (peek() != ';') fail("expected ';' at end of tree");
    ++pos_;
    skip_blank();
    if (!at_end()) fail("trailing characters after ';' (one tree per input)");

    assign_ages(root);
    try {
      return Genealogy::from_nodes(std::move(nodes_));
    } catch (const std::invalid_argument& e) {
      throw NewickError(e.what(), pos_);
    }
  }

 private:
  struct Pending {
    std::optional<std::string> label;
    double branch = 0.0;
    std::optional<std::size_t> parent;
    std::vector<std::size_t> children;
  };

  std::string_view input_;
  std::size_t pos_ = 0;
  std::vector<Pending> pending_;
  std::vector<GenealogyNode> nodes_;

  bool at_end() const { return pos_ >= input_.size(); }
  char peek() const { return at_end() ? '\0' : input_[pos_]; }

  [[noreturn]] void fail(const std::string& msg) const { throw NewickError(msg, pos_); }

  void skip_blank() {
    while (!at_end()) {
      const char c = input_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '[') {
        const std::size_t start = pos_;
        const auto close = input_.find(']', pos_);
        if (close == std::string_view::npos) {
          pos_ = start;
          fail("unterminated comment");
        }
        pos_ = close + 1;
      } else {
        break;
      }
    }
  }

  std::optional<std::string> parse_label() {
    skip_blank();
    if (peek() == '\'') {
      ++pos_;
      std::string out;
      while (true) {
        if (at_end()) fail("unterminated quoted label");
        const char c = input_[pos_++];
        if (c == '\'') {
          if (peek() == '\'') {
            out.push_back('\'');
            ++pos_;
            continue;
          }
          break;
        }
        out.push_back(c);
      }
      return out;
    }
    const std::size_t start = pos_;
    while (!at_end() && is_label_char(input_[pos_])) ++pos_;
    if (pos_ == start) return std::nullopt;
    return std::string(input_.substr(start, pos_ - start));
  }

  std::optional<double> parse_branch_length(bool required) {
    skip_blank();
    if (peek() != ':') {
      if (required) fail("missing branch length");
      return std::nullopt;
    }
    ++pos_;
    skip_blank();
    const char* first = input_.data() + pos_;
    const char* last = input_.data() + input_.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr == first) fail("malformed branch length");
    if (!std::isfinite(value)) fail("non-finite branch length");
    if (value < 0.0) fail("negative branch length");
    pos_ += static_cast<std::size_t>(ptr - first);
    return value;
  }

  std::size_t parse_subtree(bool is_root) {
    skip_blank();
    const std::size_t index = pending_.size();
    pending_.emplace_back();

    if (peek() == '(') {
      const std::size_t open = pos_;
      ++pos_;
      std::vector<std::size_t> children;
      while (true) {
        children.push_back(parse_subtree(false));
        skip_blank();
        if (peek() == ',') {
          ++pos_;
          continue;
        }
        if (peek() == ')') {
          ++pos_;
          break;
        }
        fail("expected ',' or ')'");
      }
      if (children.size() != 2) {
        throw NewickError("non-binary node with " + std::to_string(children.size()) + " children",
                          open);
      }
      for (const auto c : children) pending_[c].parent = index;
      pending_[index].children = std::move(children);
      parse_label();  // internal labels are accepted and ignored
    } else {
      auto label = parse_label();
      if (!label) fail("expected a tip label or '('");
      pending_[index].label = std::move(label);
    }

    const auto length = parse_branch_length(!is_root);
    pending_[index].branch = is_root ? 0.0 : *length;
    return index;
  }

  void assign_ages(std::size_t root) {
    std::vector<double> depth(pending_.size(), 0.0);
    // Pre-order indices guarantee a parent precedes its children.
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      if (i != root) depth[i] = depth[*pending_[i].parent] + pending_[i].branch;
    }
    double max_depth = 0.0;
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      if (pending_[i].children.empty()) max_depth = std::max(max_depth, depth[i]);
    }
    nodes_.resize(pending_.size());
    for (std::size_t i = 0; i < pending_.size(); ++i) {
      auto& node = nodes_[i];
      node.label = std::move(pending_[i].label);
      node.parent = pending_[i].parent;
      node.children = std::move(pending_[i].children);
      node.age = max_depth - depth[i];
      if (node.is_tip() && node.age < kTipSnapTolerance) node.age = 0.0;
    }
  }
};

bool needs_quotes(const std::string& label) {
  if (label.empty()) return true;
  return !std::all_of(label.begin(), label.end(), is_label_char);
}

void write_label(std::string& out, const std::string& label) {
  if (!needs_quotes(label)) {
    out += label;
    return;
  }
  out.push_back('\'');
  for (const char c : label) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  out.push_back('\'');
}

void write_number(std::string& out, double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  out.append(buf, ptr);
}

}  // namespace

NewickError::NewickError(const std::string& what, std::size_t position)
    : std::runtime_error("Newick error at position " + std::to_string(position) + ": " + what),
      position_(position) {}

Genealogy Genealogy::from_nodes(std::vector<GenealogyNode> nodes) {
  if (nodes.size() < 3) throw std::invalid_argument("genealogy needs at least two tips");

  std::optional<std::size_t> root;
  std::size_t n_tips = 0;
  double min_tip_age = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    if (!std::isfinite(node.age) || node.age < 0.0) {
      throw std::invalid_argument("node " + std::to_string(i) + " has an invalid age");
    }
    if (!node.parent) {
      if (root) throw std::invalid_argument("genealogy has more than one root");
      root = i;
    } else if (*node.parent >= nodes.size()) {
      throw std::invalid_argument("node " + std::to_string(i) + " has an out-of-range parent");
    }
    if (node.is_tip()) {
      ++n_tips;
      min_tip_age = std::min(min_tip_age, node.age);
    } else if (node.children.size() != 2) {
      throw std::invalid_argument("node " + std::to_string(i) + " is not binary");
    }
    for (const auto c : node.children) {
      if (c >= nodes.size() || nodes[c].parent != i) {
        throw std::invalid_argument("inconsistent parent/child links at node " + std::to_string(i));
      }
      if (!(node.age - nodes[c].age > kEdgeTolerance)) {
        throw std::invalid_argument("node " + std::to_string(i) +
                                    " is not strictly older than its child " + std::to_string(c));
      }
    }
  }
  if (!root) throw std::invalid_argument("genealogy has no root");
  if (n_tips * 2 - 1 != nodes.size()) {
    throw std::invalid_argument("node count does not match a binary tree");
  }
  if (min_tip_age != 0.0) throw std::invalid_argument("youngest tip must have age 0");

  // Every node must reach the root; strict ages along edges rule out cycles.
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::size_t cur = i;
    std::size_t steps = 0;
    while (nodes[cur].parent) {
      cur = *nodes[cur].parent;
      if (++steps > nodes.size()) throw std::invalid_argument("genealogy contains a cycle");
    }
    if (cur != *root) throw std::invalid_argument("genealogy is not connected");
  }

  Genealogy g;
  g.nodes_ = std::move(nodes);
  g.root_ = *root;
  g.n_tips_ = n_tips;
  return g;
}

std::vector<std::size_t> Genealogy::tips() const {
  std::vector<std::size_t> out;
  out.reserve(n_tips_);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_tip()) out.push_back(i);
  }
  return out;
}

Genealogy parse_newick(std::string_view text) { return NewickParser(text).parse(); }

std::string serialize_newick(const Genealogy& g) {
  std::string out;
  // Explicit stack keeps deep caterpillar trees off the call stack.
  struct Frame {
    std::size_t node;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{g.root(), 0}};
  while (!stack.empty()) {
    auto& frame = stack.back();
    const auto& node = g.node(frame.node);
    if (!node.is_tip() && frame.next_child < node.children.size()) {
      out.push_back(frame.next_child == 0 ? '(' : ',');
      const std::size_t child = node.children[frame.next_child++];
      stack.push_back({child, 0});
      continue;
    }
    if (node.is_tip()) {
      write_label(out, node.label.value_or(""));
    } else {
      out.push_back(')');
    }
    if (node.parent) {
      out.push_back(':');
      write_number(out, g.node(*node.parent).age - node.age);
    }
    stack.pop_back();
  }
  out.push_back(';');
  return out;
}

bool CoalescentData::isochronous() const {
  return std::all_of(sample_ages.begin(), sample_ages.end(), [](double a) { return a == 0.0; });
}

int CoalescentData::lineages_at(double t) const {
  const auto samples = std::upper_bound(sample_ages.begin(), sample_ages.end(), t) - sample_ages.begin();
  const auto coals = std::upper_bound(coal_ages.begin(), coal_ages.end(), t) - coal_ages.begin();
  return static_cast<int>(samples - coals);
}

void validate(const CoalescentData& d) {
  if (d.n < 2) throw std::invalid_argument("coalescent data needs at least two samples");
  if (d.sample_ages.size() != d.n) throw std::invalid_argument("sample_ages must have n entries");
  if (d.coal_ages.size() + 1 != d.n) throw std::invalid_argument("coal_ages must have n - 1 entries");
  if (!std::is_sorted(d.sample_ages.begin(), d.sample_ages.end())) {
    throw std::invalid_argument("sample_ages must be sorted");
  }
  for (const double a : d.sample_ages) {
    if (!std::isfinite(a) || a < 0.0) throw std::invalid_argument("sample ages must be finite and >= 0");
  }
  for (std::size_t i = 0; i < d.coal_ages.size(); ++i) {
    if (!std::isfinite(d.coal_ages[i]) || d.coal_ages[i] <= 0.0) {
      throw std::invalid_argument("coalescent ages must be finite and > 0");
    }
    if (i > 0 && !(d.coal_ages[i] > d.coal_ages[i - 1])) {
      throw std::invalid_argument("duplicate or unsorted coalescent ages (degenerate genealogy)");
    }
  }
  if (!(d.coal_ages.back() > d.sample_ages.back())) {
    throw std::invalid_argument("root must be older than every sample");
  }
  if (d.sample_ages.front() != 0.0) throw std::invalid_argument("youngest sample must have age 0");

  // Sweep the merged event list; samples tied with a coalescence join after it, so k counts lineages
  // just before each coalescence.
  std::size_t si = 0;
  int k = 0;
  for (std::size_t ci = 0; ci < d.coal_ages.size(); ++ci) {
    while (si < d.sample_ages.size() && d.sample_ages[si] < d.coal_ages[ci]) {
      ++k;
      ++si;
    }
    if (k < 2) {
      throw std::invalid_argument("coalescence with fewer than two lineages (lineage count reaches 0 before the root)");
    }
    --k;
  }
}

CoalescentData make_coalescent_data(std::vector<double> coal_ages, std::vector<double> sample_ages) {
  std::sort(coal_ages.begin(), coal_ages.end());
  std::sort(sample_ages.begin(), sample_ages.end());
  CoalescentData d;
  d.n = sample_ages.size();
  d.coal_ages = std::move(coal_ages);
  d.sample_ages = std::move(sample_ages);
  validate(d);
  return d;
}

CoalescentData extract_coalescent_data(const Genealogy& g) {
  std::vector<double> coal;
  std::vector<double> samples;
  coal.reserve(g.n_tips() - 1);
  samples.reserve(g.n_tips());
  for (const auto& node : g.nodes()) {
    (node.is_tip() ? samples : coal).push_back(node.age);
  }
  return make_coalescent_data(std::move(coal), std::move(samples));
}

}  // namespace coalinla
