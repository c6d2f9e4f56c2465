#include <gtest/gtest.h>

#include "trnood/gradcheck.hpp"

using namespace trnood;

// Built with a deliberately wrong softmax backward: the suite must notice.
TEST(FaultInjection, WrongSoftmaxGradientIsCaught) {
    bool softmax_failed = false;
    for (const auto& r : primitive_grad_suite(0))
        if (r.name.find("softmax") != std::string::npos && !r.pass) softmax_failed = true;
    EXPECT_TRUE(softmax_failed);
}

TEST(FaultInjection, OnlySoftmaxChecksFail) {
    for (const auto& r : primitive_grad_suite(0))
        if (r.name.find("softmax") == std::string::npos || r.name.find("segment") != std::string::npos) {
            EXPECT_TRUE(r.pass) << r.name;
        }
}
