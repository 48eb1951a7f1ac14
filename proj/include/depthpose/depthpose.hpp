#ifndef DEPTHPOSE_DEPTHPOSE_HPP_
#define DEPTHPOSE_DEPTHPOSE_HPP_

#include "depthpose/config.hpp"
#include "depthpose/data.hpp"
#include "depthpose/frame.hpp"
#include "depthpose/grad_check.hpp"
#include "depthpose/layers.hpp"
#include "depthpose/losses.hpp"
#include "depthpose/params.hpp"
#include "depthpose/pose.hpp"
#include "depthpose/posenet.hpp"
#include "depthpose/preprocess.hpp"
#include "depthpose/rng.hpp"
#include "depthpose/sgd.hpp"
#include "depthpose/tensor.hpp"
#include "depthpose/trainer.hpp"

#endif  // DEPTHPOSE_DEPTHPOSE_HPP_
