"""Peak-count and angular-error sensitivity to the relative peak threshold."""
import argparse

from spfq import experiments as ex
from spfq.config import Config


if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--thresholds", default="0.3,0.4,0.5,0.6,0.7")
    a = p.parse_args()
    print("rel_threshold,angle_deg,scheme,detected_count,mean_angular_error_deg")
    for t in (float(x) for x in a.thresholds.split(",")):
        for row in ex.run_angular(Config().replace("odf", rel_threshold=t)).rows:
            print(f"{t:g},{row['angle_deg']:g},{row['scheme']},{row['detected_count']},"
                  f"{row['mean_angular_error_deg']:.3f}")
