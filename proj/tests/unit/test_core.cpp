// SPDX-License-Identifier: Apache-2.0
#include <toa/core.hpp>
#include <toa/seed.hpp>

#include <doctest.h>

#include <set>

using namespace toa;

TEST_SUITE("core")
{
    TEST_CASE("register_sample assigns dense indices in arrival order")
    {
        auto set = SampleSet { "p", "q", Strategy::parallel_ensemble, 3 };
        for (std::size_t i = 0; i < 3; ++i)
        {
            auto s = Sample {};
            s.sample_index = 99;
            s.agent_id = "a";
            CHECK(set.register_sample(s) == i);
            CHECK(set.at(i).sample_index == i);
        }
        CHECK(set.full());
    }

    TEST_CASE("registering past capacity raises BudgetExhausted")
    {
        auto set = SampleSet { "p", "q", Strategy::random_single, 1 };
        (void)set.register_sample(Sample { .agent_id = "a" });
        CHECK_THROWS_AS((void)set.register_sample(Sample { .agent_id = "a" }), BudgetExhausted);
        CHECK(set.size() == 1);
    }

    TEST_CASE("lineage must point at earlier samples")
    {
        auto set = SampleSet { "p", "q", Strategy::sequential_refine, 4 };
        (void)set.register_sample(Sample { .agent_id = "a" });
        CHECK_THROWS((void)set.register_sample(Sample { .agent_id = "b", .parent_index = 1 }));
        CHECK_THROWS((void)set.register_sample(Sample { .agent_id = "b", .moa_context_indices = { 0, 3 } }));
        CHECK(set.register_sample(Sample { .agent_id = "b", .parent_index = 0 }) == 1);
    }

    TEST_CASE("strategy names round-trip")
    {
        for (auto s: { Strategy::random_single, Strategy::parallel_ensemble, Strategy::sequential_refine, Strategy::moa,
                       Strategy::toa })
            CHECK(parse_strategy(to_string(s)) == s);
        CHECK_FALSE(parse_strategy("beam").has_value());
    }

    TEST_CASE("format_double is shortest round-trip")
    {
        CHECK(format_double(0.8) == "0.8");
        CHECK(format_double(0.1 + 0.2) == "0.30000000000000004");
        CHECK(std::stod(format_double(0.7362914)) == 0.7362914);
    }

    TEST_CASE("whitespace token count")
    {
        CHECK(count_whitespace_tokens("") == 0);
        CHECK(count_whitespace_tokens("  one two\tthree\n") == 3);
    }

    TEST_CASE("call seeds are stable and distinct across coordinates")
    {
        static_assert(derive_call_seed(1, "p", 0, 1) == derive_call_seed(1, "p", 0, 1));
        auto seen = std::set<std::uint64_t> {};
        for (std::uint64_t master: { 0ULL, 1ULL })
            for (auto prompt: { "p0", "p1" })
                for (std::uint64_t i = 0; i < 50; ++i)
                    for (std::uint64_t attempt = 1; attempt <= 3; ++attempt)
                        seen.insert(derive_call_seed(master, prompt, i, attempt));
        CHECK(seen.size() == 2 * 2 * 50 * 3);
    }

    TEST_CASE("FNV-1a matches the published test vectors")
    {
        CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
        CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
        CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
    }
}
