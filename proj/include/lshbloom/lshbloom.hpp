#pragma once

#include "lshbloom/baselines.hpp"
#include "lshbloom/benchmark.hpp"
#include "lshbloom/bloom.hpp"
#include "lshbloom/error.hpp"
#include "lshbloom/hash.hpp"
#include "lshbloom/lsh.hpp"
#include "lshbloom/lshbloom_index.hpp"
#include "lshbloom/minhash.hpp"
#include "lshbloom/pipeline.hpp"
#include "lshbloom/text.hpp"
