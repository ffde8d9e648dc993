#include "doctest.h"

#include "cstc/error.hpp"
#include "cstc/model.hpp"

using namespace cstc;

TEST_CASE("full tree sizes and paths") {
    SUBCASE("depth 1") {
        const auto t = CstcTree::full(1, 4);
        CHECK(t.num_nodes() == 1);
        CHECK(t.num_terminals() == 2);
        CHECK(t.path(0) == std::vector<int>{0});
        CHECK(t.path(1) == std::vector<int>{0});
        CHECK(t.terminal(0).is_upper);
        CHECK_FALSE(t.terminal(1).is_upper);
    }
    SUBCASE("depth 2") {
        const auto t = CstcTree::full(2, 4);
        CHECK(t.num_nodes() == 3);
        CHECK(t.num_terminals() == 4);
        CHECK(t.path(0) == std::vector<int>{0, 1});
        CHECK(t.node(0).upper == ChildRef{ChildRef::Kind::classifier, 1});
    }
    SUBCASE("depth 3: terminals below node 5 follow root, lower child, node 5") {
        const auto t = CstcTree::full(3, 2);
        CHECK(t.num_nodes() == 7);
        CHECK(t.num_terminals() == 8);
        for (int l : t.subtree_terminals(5)) CHECK(t.path(l) == std::vector<int>{0, 2, 5});
        CHECK(t.subtree_terminals(5).size() == 2);
    }
}

TEST_CASE("every path runs parent to child and has the terminal's depth") {
    for (int depth = 1; depth <= 5; ++depth) {
        const auto t = CstcTree::full(depth, 1);
        CHECK(t.num_terminals() == (1 << depth));
        for (int l = 0; l < t.num_terminals(); ++l) {
            const auto p = t.path(l);
            CHECK(static_cast<int>(p.size()) == depth);
            CHECK(p.front() == 0);
            for (std::size_t i = 1; i < p.size(); ++i) CHECK(t.node(p[i]).parent == p[i - 1]);
            CHECK(t.terminal(l).parent == p.back());
        }
        t.validate();
    }
}

TEST_CASE("capped trees keep a breadth-first prefix") {
    const auto t = CstcTree::capped(4, 10, 3);
    CHECK(t.num_nodes() == 10);
    CHECK(t.depth() == 4);
    CHECK(t.num_terminals() == 11);
    t.validate();
    CHECK(CstcTree::capped(3, 100, 3).num_nodes() == 7);
}

TEST_CASE("subtrees and predictive nodes") {
    const auto t = CstcTree::full(3, 1);
    CHECK(t.subtree_nodes(1) == std::vector<int>{1, 3, 4});
    CHECK(t.ancestry(6) == std::vector<int>{0, 2, 6});
    CHECK(t.predictive_nodes() == std::vector<int>{3, 4, 5, 6});
    CHECK(t.subtree_terminals(0).size() == 8);
}

TEST_CASE("collapse and cut_below renumber breadth-first") {
    auto t = CstcTree::full(3, 2);
    for (int k = 0; k < t.num_nodes(); ++k) t.node(k).theta = k;

    std::vector<int> map;
    const auto c = t.collapse(1, &map);
    c.validate();
    CHECK(c.num_nodes() == 4);
    CHECK(c.num_terminals() == 5);
    CHECK(map == std::vector<int>{0, -1, 1, -1, -1, 2, 3});
    CHECK(c.node(0).upper.is_terminal());
    CHECK(c.node(2).theta == 5.0);

    const auto cut = t.cut_below(2, &map);
    cut.validate();
    CHECK(cut.num_nodes() == 5);
    CHECK(cut.node(2).upper.is_terminal());
    CHECK(cut.node(2).lower.is_terminal());
    CHECK(map[5] == -1);

    CHECK_THROWS_AS(t.collapse(0), InvalidInput);
}

TEST_CASE("structural errors are reported") {
    CHECK_THROWS_AS(CstcTree::full(0, 1), InvalidInput);
    CHECK_THROWS_AS(CstcTree::full(2, 0), InvalidInput);
    CHECK_THROWS_AS(CstcTree::capped(2, 0, 1), InvalidInput);
    const auto t = CstcTree::full(2, 1);
    CHECK_THROWS_AS(t.path(4), InvalidInput);
    CHECK_THROWS_AS(t.ancestry(-1), InvalidInput);

    std::vector<ClassifierNode> nodes = t.nodes();
    nodes[2].parent = 1;
    CHECK_THROWS_AS(CstcTree::from_parts(1, nodes), InvalidInput);
    nodes = t.nodes();
    nodes[1].beta = Vector::Zero(3);
    CHECK_THROWS_AS(CstcTree::from_parts(1, nodes), InvalidInput);
    CHECK_NOTHROW(CstcTree::from_parts(1, t.nodes()));
}
