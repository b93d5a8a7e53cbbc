#pragma once

// Unlabeled rooted trees in canonical form: enumeration, symmetry
// coefficients, chains/rakes, and markings (admissible cuts).
//
// A tree is stored as a recursively sorted list of child subtrees; the
// canonical key is the bracket encoding "[child keys...]" with children in
// canonical order, which is unique per isomorphism class.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hb {

class RootedTree {
 public:
  // Single vertex.
  RootedTree() : vertex_count_(1), key_("[]") {}

  // Root with the given child subtrees (any order; canonicalized here).
  explicit RootedTree(std::vector<RootedTree> children)
      : children_(std::move(children)) {
    std::sort(children_.begin(), children_.end());
    vertex_count_ = 1;
    key_ = "[";
    for (const RootedTree& c : children_) {
      vertex_count_ += c.vertex_count_;
      key_ += c.key_;
    }
    key_ += "]";
  }

  const std::vector<RootedTree>& children() const { return children_; }
  int vertex_count() const { return vertex_count_; }
  const std::string& canonical_key() const { return key_; }

  // Total order: by vertex count first, then lexicographic key. Stable and
  // cheap; used both for child sorting and for deterministic enumeration.
  friend bool operator<(const RootedTree& a, const RootedTree& b) {
    if (a.vertex_count_ != b.vertex_count_)
      return a.vertex_count_ < b.vertex_count_;
    return a.key_ < b.key_;
  }
  friend bool operator==(const RootedTree& a, const RootedTree& b) {
    return a.key_ == b.key_;
  }
  friend bool operator!=(const RootedTree& a, const RootedTree& b) {
    return !(a == b);
  }

 private:
  std::vector<RootedTree> children_;
  int vertex_count_;
  std::string key_;
};

// sigma(tau) = prod sigma(child) * prod multiplicity! over repeated children.
inline std::uint64_t symmetry_coefficient(const RootedTree& t) {
  std::uint64_t sigma = 1;
  const auto& ch = t.children();
  for (std::size_t i = 0; i < ch.size();) {
    std::size_t j = i;
    while (j < ch.size() && ch[j] == ch[i]) ++j;
    std::uint64_t child_sigma = symmetry_coefficient(ch[i]);
    for (std::size_t k = i; k < j; ++k) sigma *= child_sigma;
    for (std::uint64_t r = 2; r <= j - i; ++r) sigma *= r;  // multiplicity!
    i = j;
  }
  return sigma;
}

inline RootedTree chain(int m) {
  if (m < 1) throw std::invalid_argument("chain: m must be >= 1");
  RootedTree t;
  for (int i = 1; i < m; ++i) t = RootedTree(std::vector<RootedTree>{t});
  return t;
}

inline RootedTree rake(int m) {
  if (m < 1) throw std::invalid_argument("rake: m must be >= 1");
  if (m == 1) return RootedTree();
  return RootedTree(std::vector<RootedTree>(m - 1, RootedTree()));
}

// All unlabeled rooted trees with exactly m vertices, in canonical-key order.
// Children multisets are built from smaller trees with nondecreasing
// (size, key) rank, so each multiset is produced exactly once.
inline std::vector<RootedTree> enumerate_trees(int m, int max_m = 10) {
  if (m < 1 || m > max_m)
    throw std::invalid_argument("enumerate_trees: m out of range [1, max]");
  // pool[s] = trees with s+1 ... flat pool of all trees with < m vertices,
  // sorted ascending; index rank is reused to avoid duplicate multisets.
  std::vector<RootedTree> pool;  // all trees with 1..m-1 vertices
  std::vector<std::vector<RootedTree>> by_size(m + 1);
  by_size[1] = {RootedTree()};
  for (int s = 2; s <= m; ++s) {
    pool.clear();
    for (int k = 1; k < s; ++k)
      pool.insert(pool.end(), by_size[k].begin(), by_size[k].end());
    std::sort(pool.begin(), pool.end());
    std::vector<RootedTree> out;
    std::vector<RootedTree> current;
    // Pick children with total s-1 vertices, pool indices nondecreasing.
    auto pick = [&](auto&& self, std::size_t from, int remaining) -> void {
      if (remaining == 0) {
        out.emplace_back(current);
        return;
      }
      for (std::size_t i = from; i < pool.size(); ++i) {
        if (pool[i].vertex_count() > remaining) continue;
        current.push_back(pool[i]);
        self(self, i, remaining - pool[i].vertex_count());
        current.pop_back();
      }
    };
    pick(pick, 0, s - 1);
    std::sort(out.begin(), out.end());
    by_size[s] = std::move(out);
  }
  return by_size[m];
}

// Path from the root to a vertex as child indices in canonical child order.
using VertexPath = std::vector<int>;

// A marking (admissible cut): marked vertices are non-root, pairwise
// non-ancestral. The decomposition removes each marked subtree, leaving the
// remainder tau_0.
struct Marking {
  std::vector<VertexPath> paths;        // positions of the marked vertices
  std::vector<RootedTree> cut_subtrees; // tau_1 ... tau_{|m|}, aligned with paths
  RootedTree remainder;                 // tau_0
  int size() const { return static_cast<int>(paths.size()); }
};

namespace detail {

struct SubMarking {
  std::vector<VertexPath> paths;         // relative to this subtree's root
  std::vector<RootedTree> cut_subtrees;
  RootedTree remainder;                  // subtree with cuts removed, root kept
  bool whole_subtree_cut = false;        // true when this child itself is marked
};

// All ways to mark vertices strictly below (or at) the root of `t`, where
// marking t's own root is represented by whole_subtree_cut. Root-level calls
// exclude that option.
inline std::vector<SubMarking> sub_markings(const RootedTree& t,
                                            bool allow_mark_root) {
  std::vector<SubMarking> result;
  if (allow_mark_root) {
    SubMarking m;
    m.whole_subtree_cut = true;
    m.cut_subtrees = {t};
    result.push_back(std::move(m));
  }
  // Not marking the root: combine independent choices per child subtree.
  std::vector<std::vector<SubMarking>> per_child;
  per_child.reserve(t.children().size());
  for (const RootedTree& c : t.children())
    per_child.push_back(sub_markings(c, /*allow_mark_root=*/true));
  std::vector<std::size_t> choice(per_child.size(), 0);
  while (true) {
    SubMarking m;
    std::vector<RootedTree> remainder_children;
    for (std::size_t i = 0; i < per_child.size(); ++i) {
      const SubMarking& cm = per_child[i][choice[i]];
      if (cm.whole_subtree_cut) {
        m.paths.push_back({static_cast<int>(i)});
        m.cut_subtrees.push_back(cm.cut_subtrees[0]);
      } else {
        for (const VertexPath& p : cm.paths) {
          VertexPath q;
          q.reserve(p.size() + 1);
          q.push_back(static_cast<int>(i));
          q.insert(q.end(), p.begin(), p.end());
          m.paths.push_back(std::move(q));
        }
        m.cut_subtrees.insert(m.cut_subtrees.end(), cm.cut_subtrees.begin(),
                              cm.cut_subtrees.end());
        remainder_children.push_back(cm.remainder);
      }
    }
    m.remainder = RootedTree(std::move(remainder_children));
    result.push_back(std::move(m));
    // Next combination.
    std::size_t i = 0;
    for (; i < per_child.size(); ++i) {
      if (++choice[i] < per_child[i].size()) break;
      choice[i] = 0;
    }
    if (i == per_child.size()) break;
  }
  return result;
}

}  // namespace detail

// Every marking of t, including the empty one. The root is never marked.
inline std::vector<Marking> enumerate_markings(const RootedTree& t) {
  std::vector<Marking> out;
  for (detail::SubMarking& sm :
       detail::sub_markings(t, /*allow_mark_root=*/false)) {
    Marking m;
    m.paths = std::move(sm.paths);
    m.cut_subtrees = std::move(sm.cut_subtrees);
    m.remainder = std::move(sm.remainder);
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace hb
