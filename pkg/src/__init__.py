# fovsafe Source Package
