"""Closed-loop seizure prediction: synthetic biosignals, a numpy 1-D CNN
trained with focal loss, majority-vote fusion, and a discrete-event model of
the ultrasonic intra-body sensor network."""

__version__ = "0.1.0"
