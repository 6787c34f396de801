#pragma once

#include "ssrp/audio/features.hpp"
#include "ssrp/audio/wav.hpp"
#include "ssrp/experiment/dataset.hpp"
#include "ssrp/experiment/pipeline.hpp"
#include "ssrp/experiment/report.hpp"
#include "ssrp/experiment/synth.hpp"
#include "ssrp/nn/checkpoint.hpp"
#include "ssrp/nn/network.hpp"
#include "ssrp/nn/train.hpp"
#include "ssrp/pca/pca.hpp"
#include "ssrp/pooling/pooling.hpp"
