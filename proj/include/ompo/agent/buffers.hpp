#pragma once

#include "ompo/random.hpp"
#include "ompo/transition.hpp"

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ompo::agent {

/// Fixed-capacity FIFO; pushing into a full buffer overwrites the oldest entry.
template <class T>
class RingBuffer {
public:
    explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("RingBuffer: zero capacity");
    }

    void push(T item) {
        if (items_.size() < capacity_) {
            items_.push_back(std::move(item));
        } else {
            items_[head_] = std::move(item);
            head_ = (head_ + 1) % capacity_;
        }
    }

    /// Index 0 is the oldest retained entry.
    const T& operator[](std::size_t i) const { return items_[(head_ + i) % items_.size()]; }
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    bool full() const { return items_.size() == capacity_; }

    void clear() {
        items_.clear();
        head_ = 0;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<T> items_;
};

inline constexpr std::size_t kLocalCapacity = 1000;
inline constexpr std::size_t kGlobalCapacity = 1'000'000;

/// Global buffer D_G, local buffer D_L and initial-state buffer D_0.
class BufferSet {
public:
    explicit BufferSet(std::size_t local_capacity = kLocalCapacity, std::size_t global_capacity = kGlobalCapacity)
        : local_capacity_(local_capacity), global_(global_capacity) {
        if (local_capacity == 0) throw std::invalid_argument("BufferSet: zero local capacity");
    }

    void add_local(TransitionRecord r) {
        r.validate();
        if (local_.size() >= local_capacity_) throw std::logic_error("BufferSet: local buffer is full; merge first");
        local_.push_back(std::move(r));
    }

    void add_global(TransitionRecord r) {
        r.validate();
        global_.push(std::move(r));
    }

    void add_initial_state(std::vector<double> s0) { initial_states_.push_back(std::move(s0)); }

    /// D_G <- D_G u D_L, D_L <- {}. Returns the number of records moved.
    std::size_t merge() {
        const std::size_t n = local_.size();
        for (auto& r : local_) global_.push(std::move(r));
        local_.clear();
        return n;
    }

    bool local_full() const { return local_.size() >= local_capacity_; }
    std::size_t local_capacity() const { return local_capacity_; }

    const std::vector<TransitionRecord>& local() const { return local_; }
    const RingBuffer<TransitionRecord>& global() const { return global_; }
    const std::vector<std::vector<double>>& initial_states() const { return initial_states_; }

private:
    std::size_t local_capacity_;
    std::vector<TransitionRecord> local_;
    RingBuffer<TransitionRecord> global_;
    std::vector<std::vector<double>> initial_states_;
};

}  // namespace ompo::agent
