# fovsafe Tests Package
