#include "dcs/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

using dcs::SplitRng;
using dcs::StreamTag;

TEST_CASE("same seed reproduces the sequence") {
    SplitRng a(12345);
    SplitRng b(12345);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("substreams are independent of parent consumption") {
    SplitRng parent(7);
    const SplitRng before = parent.substream(StreamTag::Signal, 3);
    for (int i = 0; i < 17; ++i) parent.next_u64();
    SplitRng after = parent.substream(StreamTag::Signal, 3);
    SplitRng expect = before;
    for (int i = 0; i < 10; ++i) CHECK(after.next_u64() == expect.next_u64());
}

TEST_CASE("distinct tags and indices give distinct streams") {
    SplitRng root(99);
    std::set<std::uint64_t> firsts;
    for (int idx = 0; idx < 50; ++idx) {
        firsts.insert(root.substream(StreamTag::Run, static_cast<std::uint64_t>(idx)).next_u64());
    }
    firsts.insert(root.substream(StreamTag::Noise, 0).next_u64());
    firsts.insert(root.substream(StreamTag::Matrix, 0).next_u64());
    CHECK(firsts.size() == 52);
}

TEST_CASE("uniform01 stays in [0,1) and looks flat") {
    SplitRng rng(4);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(std::abs(sum / n - 0.5) < 0.01);
}

TEST_CASE("uniform_int is unbiased over a small range") {
    SplitRng rng(11);
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(rng.uniform_int(7))]++;
    for (int c : counts) CHECK(std::abs(c - n / 7) < 5 * std::sqrt(n / 7.0));
}

TEST_CASE("normal has the right first two moments") {
    SplitRng rng(21);
    const int n = 200000;
    double mean = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        mean += x;
        sq += x * x;
    }
    mean /= n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}
