#include "mapjoin/state.hpp"

#include <algorithm>

#include "mapjoin/errors.hpp"

namespace mapjoin {

namespace {
std::string key_str(StateKey k) {
  return std::string(k.kind == EntityKind::Pose ? "pose " : "feature ") + std::to_string(k.id);
}
}  // namespace

void StateVector::add(StateKey key, const Eigen::VectorXd& block) {
  if (block.size() == 0) {
    throw InvalidInputError("StateVector::add: empty block for " + key_str(key));
  }
  if (index_.count(key)) {
    throw InvalidInputError("StateVector::add: duplicate key " + key_str(key));
  }
  Entry e{key, dim(), static_cast<int>(block.size())};
  index_.emplace(key, static_cast<int>(entries_.size()));
  entries_.push_back(e);
  values_.conservativeResize(e.offset + e.dim);
  values_.segment(e.offset, e.dim) = block;
}

const StateVector::Entry& StateVector::entry(StateKey key) const {
  auto it = index_.find(key);
  if (it == index_.end()) {
    throw MissingEntityError("StateVector: no entry for " + key_str(key));
  }
  return entries_[it->second];
}

Eigen::VectorXd StateVector::block_of(StateKey key) const {
  const Entry& e = entry(key);
  return values_.segment(e.offset, e.dim);
}

void StateVector::set_block(StateKey key, const Eigen::VectorXd& block) {
  const Entry& e = entry(key);
  if (block.size() != e.dim) {
    throw InvalidInputError("StateVector::set_block: dimension mismatch for " + key_str(key));
  }
  values_.segment(e.offset, e.dim) = block;
}

bool StateVector::is_sorted() const {
  return std::is_sorted(entries_.begin(), entries_.end(),
                        [](const Entry& a, const Entry& b) { return a.key < b.key; });
}

std::pair<StateVector, std::vector<int>> StateVector::sorted() const {
  std::vector<const Entry*> order;
  order.reserve(entries_.size());
  for (const Entry& e : entries_) {
    order.push_back(&e);
  }
  std::sort(order.begin(), order.end(),
            [](const Entry* a, const Entry* b) { return a->key < b->key; });

  StateVector out;
  std::vector<int> perm;
  perm.reserve(values_.size());
  for (const Entry* e : order) {
    out.add(e->key, values_.segment(e->offset, e->dim));
    for (int i = 0; i < e->dim; ++i) {
      perm.push_back(e->offset + i);
    }
  }
  return {std::move(out), std::move(perm)};
}

std::vector<StateKey> StateVector::keys() const {
  std::vector<StateKey> out;
  out.reserve(entries_.size());
  for (const Entry& e : entries_) {
    out.push_back(e.key);
  }
  return out;
}

bool operator==(const StateVector& a, const StateVector& b) {
  if (a.size() != b.size() || a.dim() != b.dim()) {
    return false;
  }
  for (int i = 0; i < a.size(); ++i) {
    if (a.entries_[i].key != b.entries_[i].key || a.entries_[i].dim != b.entries_[i].dim) {
      return false;
    }
  }
  return a.values_ == b.values_;
}

}  // namespace mapjoin
