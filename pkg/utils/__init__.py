# fovsafe Utils Package
