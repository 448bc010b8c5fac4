#include "owl3d/common.hpp"

#include <algorithm>
#include <iterator>

namespace owl3d {

bool is_sorted_unique(std::span<const Index> indices) {
  return std::adjacent_find(indices.begin(), indices.end(),
                            [](Index a, Index b) { return a >= b; }) == indices.end();
}

IndexSet set_union(std::span<const Index> a, std::span<const Index> b) {
  IndexSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

IndexSet set_intersection(std::span<const Index> a, std::span<const Index> b) {
  IndexSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

IndexSet set_difference(std::span<const Index> a, std::span<const Index> b) {
  IndexSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

std::size_t intersection_size(std::span<const Index> a, std::span<const Index> b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

void canonicalize(IndexSet& indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
}

}  // namespace owl3d
