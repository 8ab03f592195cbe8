#pragma once

#include "wsdl/core/error.hpp"
#include "wsdl/core/objective.hpp"
#include "wsdl/core/param_vector.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/core/vector_ops.hpp"
#include "wsdl/data/batching.hpp"
#include "wsdl/data/chars.hpp"
#include "wsdl/data/cifar10.hpp"
#include "wsdl/data/dataset.hpp"
#include "wsdl/data/synthetic.hpp"
#include "wsdl/models/model.hpp"
#include "wsdl/optim/adamw.hpp"
#include "wsdl/optim/schedule.hpp"
#include "wsdl/train/checkpoint.hpp"
#include "wsdl/train/config.hpp"
#include "wsdl/train/trainer.hpp"
#include "wsdl/diag/landscape.hpp"
#include "wsdl/diag/pca.hpp"
#include "wsdl/diag/stats.hpp"
#include "wsdl/diag/trajectory.hpp"
